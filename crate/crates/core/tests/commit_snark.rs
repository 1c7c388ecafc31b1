use rand::Rng;
use sha2::{Digest, Sha256};
use zaps_core::arith::{toy_curve, CurvePoint, Fq, PairGroupElem, Scalar};
use zaps_core::rng::{sub_rng, SimRng};
use zaps_core::snark::circuit::{compile_flightpath_circuit, route_accumulator, Geofence};
use zaps_core::snark::pinocchio::{pairing_sides_exponent, prove_unchecked};
use zaps_core::snark::poly::evaluate;
use zaps_core::snark::qap::r1cs_to_qap;
use zaps_core::snark::r1cs::R1CSystem;
use zaps_core::snark::zk::{leaks_witness, simulate_schnorr};
use zaps_core::snark::{
    commit, gen_proof, gen_proof_blinded, schnorr_prove, schnorr_verify, snark_setup, ver_proof, verproof,
    FlightPath, QapProof, SnarkError, SnarkProof, Statement,
};
use zaps_core::stats::ks_two_sample;

const TRIALS: usize = 1000;
const HONEST: usize = 500;

fn fence() -> Geofence {
    Geofence::new(100, 900, 200, 800).unwrap()
}

fn random_path(rng: &mut SimRng, n: usize) -> FlightPath {
    let f = fence();
    FlightPath::new(
        (0..n)
            .map(|_| (rng.gen_range(f.x_min..=f.x_max), rng.gen_range(f.y_min..=f.y_max)))
            .collect(),
    )
    .unwrap()
}

fn random_scalar(rng: &mut SimRng) -> Scalar {
    loop {
        let s = Scalar::random(zaps_core::arith::secp256k1(), rng);
        if !s.is_zero() {
            return s;
        }
    }
}

#[test]
fn schnorr_completeness_and_soundness() {
    let mut rng = sub_rng(11, "snark/schnorr");
    let mut accepted = 0;
    for i in 0..HONEST {
        let path = random_path(&mut rng, 5);
        let r = random_scalar(&mut rng);
        let c = commit(&path, &r).unwrap();
        let ctx = format!("ctx-{i}");
        let proof = schnorr_prove(&c, &path, &r, ctx.as_bytes(), &mut rng).unwrap();
        accepted += schnorr_verify(&c.point, &proof, ctx.as_bytes()) as usize;
        assert!(!schnorr_verify(&c.point, &proof, b"other context"));
    }
    assert_eq!(accepted, HONEST);

    let path = random_path(&mut rng, 8);
    let r = random_scalar(&mut rng);
    let c = commit(&path, &r).unwrap();
    let proof = schnorr_prove(&c, &path, &r, b"ctx", &mut rng).unwrap();
    let mut forged = 0;
    for _ in 0..TRIALS {
        let mut p = proof;
        let pos = rng.gen_range(0..96);
        p.0[pos] ^= rng.gen_range(1..=255u8);
        forged += schnorr_verify(&c.point, &p, b"ctx") as usize;
        // An opening of a different path proves nothing about `c`.
        let other = random_path(&mut rng, 8);
        let r2 = random_scalar(&mut rng);
        let c2 = commit(&other, &r2).unwrap();
        let wrong = schnorr_prove(&c2, &other, &r2, b"ctx", &mut rng).unwrap();
        forged += schnorr_verify(&c.point, &wrong, b"ctx") as usize;
    }
    assert_eq!(forged, 0);
    assert_eq!(
        schnorr_prove(&c, &random_path(&mut rng, 8), &r, b"ctx", &mut rng),
        Err(SnarkError::InconsistentOpening)
    );
    let mut bad_pad = proof;
    bad_pad.0[127] = 1;
    assert!(!schnorr_verify(&c.point, &bad_pad, b"ctx"));
}

#[test]
fn schnorr_challenges_bind_the_context() {
    let mut rng = sub_rng(12, "snark/fs");
    let path = random_path(&mut rng, 5);
    let r = random_scalar(&mut rng);
    let c = commit(&path, &r).unwrap();
    let a = schnorr_prove(&c, &path, &r, b"a", &mut rng).unwrap();
    let b = schnorr_prove(&c, &path, &r, b"b", &mut rng).unwrap();
    assert_ne!(a.0[32..64], b.0[32..64]);
}

#[test]
fn qap_completeness_and_pairing_identity() {
    let circuit = compile_flightpath_circuit(fence(), 5).unwrap();
    let (pk, vk) = snark_setup(64, &circuit.system, &mut sub_rng(13, "snark/setup")).unwrap();
    let mut rng = sub_rng(13, "snark/qap");
    let mut accepted = 0;
    for _ in 0..HONEST {
        let path = random_path(&mut rng, 5);
        let w = circuit.witness(&path).unwrap();
        let x = circuit.statement(route_accumulator(&path));
        let proof = gen_proof_blinded(&pk, &x, &w, &mut rng).unwrap();
        accepted += ver_proof(&vk, &x, &proof) as usize;
        let (lhs, rhs) = pairing_sides_exponent(&vk, &x, &proof).unwrap();
        assert_eq!(lhs, rhs);
        let env = proof.to_envelope();
        assert_eq!(QapProof::from_envelope(&env).unwrap(), proof);
        assert!(verproof(&vk, &x, &env));
    }
    assert_eq!(accepted, HONEST);
}

fn random_element_like(e: &PairGroupElem, rng: &mut SimRng) -> PairGroupElem {
    let v = Fq::random(rng);
    match e {
        PairGroupElem::G1(_) => PairGroupElem::G1(v),
        PairGroupElem::G2(_) => PairGroupElem::G2(v),
        PairGroupElem::Gt(_) => unreachable!("proofs hold no GT elements"),
    }
}

#[test]
fn qap_soundness_fuzz() {
    let circuit = compile_flightpath_circuit(fence(), 5).unwrap();
    let (pk, vk) = snark_setup(64, &circuit.system, &mut sub_rng(14, "snark/setup")).unwrap();
    let mut rng = sub_rng(14, "snark/fuzz");
    let path = random_path(&mut rng, 5);
    let w = circuit.witness(&path).unwrap();
    let x = circuit.statement(route_accumulator(&path));
    let proof = gen_proof(&pk, &x, &w).unwrap();
    assert!(ver_proof(&vk, &x, &proof));
    let mut accepted = 0;
    for i in 0..TRIALS {
        let mut p = proof;
        match i % 4 {
            0 => p.pi_a = random_element_like(&p.pi_a, &mut rng),
            1 => p.pi_b = random_element_like(&p.pi_b, &mut rng),
            2 => p.pi_c = random_element_like(&p.pi_c, &mut rng),
            _ => p.pi_h = random_element_like(&p.pi_h, &mut rng),
        }
        accepted += ver_proof(&vk, &x, &p) as usize;

        let mut env = proof.to_envelope();
        let pos = 24 + 32 * rng.gen_range(0..4) + rng.gen_range(0..8);
        env.0[pos] ^= rng.gen_range(1..=255u8);
        accepted += verproof(&vk, &x, &env) as usize;

        // A wire flipped away from the satisfying assignment.
        let mut bad = w.clone();
        let wire = rng.gen_range(6..bad.len());
        bad[wire] = bad[wire] + Fq::ONE;
        accepted += ver_proof(&vk, &x, &prove_unchecked(&pk, &bad)) as usize;

        let mut shifted = x.clone();
        let k = rng.gen_range(0..shifted.public_inputs.len());
        shifted.public_inputs[k] = shifted.public_inputs[k] + Fq::ONE;
        accepted += ver_proof(&vk, &shifted, &proof) as usize;
    }
    assert_eq!(accepted, 0);
}

#[test]
fn keys_from_different_setups_never_cross_verify() {
    let circuit = compile_flightpath_circuit(fence(), 5).unwrap();
    let mut rng = sub_rng(15, "snark/cross");
    let path = random_path(&mut rng, 5);
    let w = circuit.witness(&path).unwrap();
    let x = circuit.statement(route_accumulator(&path));
    let mut cross = 0;
    for i in 0..100 {
        let (pk, _) = snark_setup(64, &circuit.system, &mut sub_rng(i, "snark/cross/a")).unwrap();
        let (_, vk) = snark_setup(64, &circuit.system, &mut sub_rng(i, "snark/cross/b")).unwrap();
        cross += ver_proof(&vk, &x, &gen_proof(&pk, &x, &w).unwrap()) as usize;
    }
    assert_eq!(cross, 0);
}

#[test]
fn square_circuit_end_to_end() {
    // x * x = y with y public.
    let mut sys = R1CSystem::new(1);
    let x = sys.alloc();
    sys.enforce(vec![(x, Fq::ONE)], vec![(x, Fq::ONE)], vec![(1, Fq::ONE)]);
    let (pk, vk) = snark_setup(64, &sys, &mut sub_rng(16, "snark/square")).unwrap();
    let st = Statement { public_inputs: vec![Fq::new(9)] };
    let proof = gen_proof(&pk, &st, &[Fq::ONE, Fq::new(9), Fq::new(3)]).unwrap();
    assert!(ver_proof(&vk, &st, &proof));
    assert!(!ver_proof(&vk, &Statement { public_inputs: vec![Fq::new(10)] }, &proof));
    assert!(gen_proof(&pk, &st, &[Fq::ONE, Fq::new(9), Fq::new(4)]).is_err());
    let again = snark_setup(64, &sys, &mut sub_rng(16, "snark/square")).unwrap();
    assert_eq!(again, (pk, vk));
}

#[test]
fn circuit_shape_and_boundaries() {
    for n in [5, 8, 10, 15] {
        let c = compile_flightpath_circuit(fence(), n).unwrap();
        // Per coordinate: 16 bits each for c, c - lo and hi - c, plus two
        // linear ties. Two coordinates and two cubing steps per waypoint,
        // then the output equality.
        let per_coordinate = 3 * 16 + 2;
        assert_eq!(c.system.num_constraints(), n * (2 * per_coordinate + 2) + 1);
    }
    let c = compile_flightpath_circuit(fence(), 5).unwrap();
    let f = fence();
    let corners = FlightPath::new(vec![
        (f.x_min, f.y_min),
        (f.x_max, f.y_max),
        (f.x_min, f.y_max),
        (f.x_max, f.y_min),
        (500, 500),
    ])
    .unwrap();
    let w = c.witness(&corners).unwrap();
    assert!(c.system.is_satisfied(&w));
    for outside in [(f.x_min - 1, 500), (f.x_max + 1, 500), (500, f.y_min - 1), (500, f.y_max + 1)] {
        let mut pts = corners.waypoints().to_vec();
        pts[2] = outside;
        let p = FlightPath::new(pts).unwrap();
        assert!(matches!(c.witness(&p), Err(SnarkError::WitnessInvalid { .. })));
    }
    assert!(FlightPath::new(vec![]).is_err());
    assert!(compile_flightpath_circuit(fence(), 6).is_err());
}

#[test]
fn qap_divisibility_and_spot_checks() {
    let circuit = compile_flightpath_circuit(fence(), 5).unwrap();
    let qap = r1cs_to_qap(&circuit.system);
    let mut rng = sub_rng(17, "snark/qap-poly");
    let path = random_path(&mut rng, 5);
    let w = circuit.witness(&path).unwrap();
    let (h, rem) = qap.quotient(&w);
    assert!(rem.iter().all(|c| c.is_zero()));
    let (a, b, c) = qap.combined(&w);
    let z = qap.vanishing();
    for _ in 0..10 {
        let t = Fq::random(&mut rng);
        let lhs = evaluate(&a, t) * evaluate(&b, t) - evaluate(&c, t);
        assert_eq!(lhs, evaluate(&h, t) * evaluate(&z, t));
        // Same identity through the per-wire evaluation path.
        let (ea, eb, ec) = qap.evaluate_at(t);
        let dot = |e: &[Fq]| e.iter().zip(&w).map(|(x, y)| *x * *y).sum::<Fq>();
        assert_eq!(dot(&ea) * dot(&eb) - dot(&ec), lhs);
    }
    let mut bad = w.clone();
    bad[10] = bad[10] + Fq::ONE;
    let (_, rem) = qap.quotient(&bad);
    assert!(rem.iter().any(|c| !c.is_zero()));
}

#[test]
fn simulated_transcripts_match_honest_byte_distribution() {
    let mut rng = sub_rng(18, "snark/zk");
    let path = random_path(&mut rng, 5);
    let r = random_scalar(&mut rng);
    let c = commit(&path, &r).unwrap();
    let (mut honest, mut simulated) = (Vec::new(), Vec::new());
    for _ in 0..10_000 {
        let p = schnorr_prove(&c, &path, &r, b"zk", &mut rng).unwrap();
        let s = simulate_schnorr(&c.point, &mut rng);
        honest.extend(p.0[..96].iter().map(|b| *b as f64));
        simulated.extend(s.0[..96].iter().map(|b| *b as f64));
    }
    let (_, p) = ks_two_sample(&honest, &simulated);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn qap_proofs_carry_no_witness_bytes() {
    let circuit = compile_flightpath_circuit(fence(), 5).unwrap();
    let (pk, _) = snark_setup(64, &circuit.system, &mut sub_rng(19, "snark/setup")).unwrap();
    let mut rng = sub_rng(19, "snark/leak");
    for _ in 0..100 {
        let path = random_path(&mut rng, 5);
        let w = circuit.witness(&path).unwrap();
        let x = circuit.statement(route_accumulator(&path));
        let proof = gen_proof_blinded(&pk, &x, &w, &mut rng).unwrap().to_envelope();
        assert!(!leaks_witness(&proof, &path.encode()[2..], 4));
        let private: Vec<u8> = w[6..].iter().filter(|v| v.value() > 1).flat_map(|v| v.value().to_be_bytes()).collect();
        assert!(!leaks_witness(&proof, &private, 8));
    }
}

#[test]
fn commitment_matches_scalar_oracle_on_toy_curve() {
    let c = toy_curve();
    let path = FlightPath::new(vec![(3, 4), (5, 6)]).unwrap();
    for r in 1..19u64 {
        let rs = Scalar::from_u64(c, r);
        let com = commit(&path, &rs).unwrap();
        let mut data = path.encode();
        data.extend_from_slice(&rs.to_be_bytes());
        let digest = Sha256::digest(&data);
        let h = digest.iter().fold(0u64, |acc, b| (acc * 256 + *b as u64) % 19);
        let k = (r + h) % 19;
        let mut expected = CurvePoint::identity(c);
        for _ in 0..k {
            expected = expected + CurvePoint::generator(c);
        }
        assert_eq!(com.point, expected, "r = {r}");
    }
    let a = commit(&path, &Scalar::from_u64(c, 1)).unwrap();
    let b = commit(&path, &Scalar::from_u64(c, 2)).unwrap();
    assert_ne!(a.point, b.point);
}

#[test]
fn malformed_envelopes_are_rejected() {
    let mut rng = sub_rng(20, "snark/env");
    let path = random_path(&mut rng, 5);
    let r = random_scalar(&mut rng);
    let c = commit(&path, &r).unwrap();
    assert!(!schnorr_verify(&c.point, &SnarkProof([0u8; 128]), b"x"));
    assert!(!schnorr_verify(&c.point, &SnarkProof([0xff; 128]), b"x"));
}
