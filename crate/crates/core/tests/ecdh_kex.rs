use std::collections::HashSet;

use proptest::prelude::*;
use zaps_core::arith::{secp256k1, toy_curve, CurvePoint, DomainParams, Scalar};
use zaps_core::kex::{derive_session_key_with_point, ecdh, gen_keypair, KeyPair};
use zaps_core::protocol::{
    enroll_pair, honest_run, random_route, run_honest_session, standard_fence, Authority, DEFAULT_DELTA_T,
};
use zaps_core::rng::sub_rng;
use zaps_core::snark::Backend;

/// Runs `runs` honest sessions, `per_authority` at a time against one
/// server, and checks every party's key point against `r1 * r2 * V_s * G`
/// computed in the scalar field. The toy curve has only 19 nonces, so its
/// nonce registry must be fresh for every session.
fn three_party_agreement(curve: &'static DomainParams, runs: u64, per_authority: u64) {
    let g = CurvePoint::generator(curve);
    let route = random_route(&mut sub_rng(0, "kex/route"), &standard_fence(), 5);
    for batch in 0..runs / per_authority {
        let seed = 1000 + batch;
        let auth = Authority::setup(curve, Backend::Schnorr, DEFAULT_DELTA_T, seed, &mut sub_rng(seed, "kex/auth"));
        let (mut user, mut drone) = enroll_pair(&auth, seed, 0).unwrap();
        let v_s = *auth.server_secret();
        for i in 0..per_authority {
            user.new_session();
            drone.new_session();
            let mut run = honest_run(&auth, user, drone, &route, false, sub_rng(seed, &format!("kex/run/{i}")));
            run_honest_session(&mut run, (i + 1) * 10_000_000, 20_000);
            assert!(run.outcome().is_confirmed(), "{} seed {seed} run {i}: {:?}", curve.name, run.outcome());
            let r1 = *run.user.session_nonce().unwrap();
            let r2 = *run.drone.session_nonce().unwrap();
            let expected = g.mul(&(r1 * r2 * v_s));
            assert_eq!(run.user.session_point(), Some(&expected));
            assert_eq!(run.drone.session_point(), Some(&expected));
            assert_eq!(run.server.session_point(), Some(&expected));
            assert_eq!(run.user.session_key(), run.drone.session_key());
            assert_eq!(run.user.session_key(), run.server.session_key());
            let (u, d, _) = run.into_parties();
            user = u;
            drone = d;
        }
    }
}

#[test]
fn three_party_keys_agree_on_secp256k1() {
    three_party_agreement(secp256k1(), 1000, 50);
}

#[test]
fn three_party_keys_agree_on_toy_curve() {
    three_party_agreement(toy_curve(), 1000, 1);
}

#[test]
fn toy_two_three_five() {
    let c = toy_curve();
    let g = CurvePoint::generator(c);
    let s = |k| Scalar::from_u64(c, k);
    let p_s = g.mul(&s(5));
    let (user, pu) = derive_session_key_with_point(&s(2), &p_s.mul(&s(3)), b"t").unwrap();
    let (drone, pd) = derive_session_key_with_point(&s(3), &p_s.mul(&s(2)), b"t").unwrap();
    assert_eq!(user, drone);
    assert_eq!(pu, pd);
    assert_eq!(*pu.point(), g.mul(&s(30)));
    let (other, po) = derive_session_key_with_point(&s(2), &p_s.mul(&s(3)), b"t'").unwrap();
    assert_eq!(po, pu);
    assert_ne!(other.key, user.key);
}

#[test]
fn ten_thousand_keypairs_without_repeats() {
    let mut rng = sub_rng(3, "kex/draws");
    let mut seen = HashSet::new();
    for _ in 0..10_000 {
        assert!(seen.insert(gen_keypair(secp256k1(), &mut rng).secret().to_be_bytes()));
    }
}

#[test]
fn off_curve_peer_rejected() {
    let c = toy_curve();
    let kp = KeyPair::from_secret(Scalar::from_u64(c, 4)).unwrap();
    assert!(ecdh(kp.secret(), &CurvePoint::identity(c)).is_err());
    assert!(ecdh(kp.secret(), &CurvePoint::generator(secp256k1())).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ecdh_is_symmetric(a in any::<[u8; 32]>(), b in any::<[u8; 32]>()) {
        let c = secp256k1();
        let (a, b) = (Scalar::from_be_bytes_reduced(c, &a), Scalar::from_be_bytes_reduced(c, &b));
        prop_assume!(!a.is_zero() && !b.is_zero());
        let g = CurvePoint::generator(c);
        prop_assert_eq!(ecdh(&a, &g.mul(&b)).unwrap(), ecdh(&b, &g.mul(&a)).unwrap());
    }

    #[test]
    fn master_secrets_are_separated(seed in any::<u64>()) {
        let c = secp256k1();
        let mut rng = sub_rng(seed, "kex/sep");
        let (s, u, d) = (gen_keypair(c, &mut rng), gen_keypair(c, &mut rng), gen_keypair(c, &mut rng));
        prop_assume!(u.secret() != d.secret());
        let smk_us = ecdh(s.secret(), u.public()).unwrap();
        let smk_ds = ecdh(s.secret(), d.public()).unwrap();
        prop_assert_ne!(smk_us.x_bytes(), smk_ds.x_bytes());
        prop_assert_eq!(smk_us, ecdh(u.secret(), s.public()).unwrap());
    }
}
