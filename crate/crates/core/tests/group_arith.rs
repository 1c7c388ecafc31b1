use num_bigint::BigUint;
use proptest::prelude::*;
use zaps_core::arith::{
    hash, hash_concat, pair, pairing_exponent, point_add, scalar_mul, secp256k1, toy_curve, CurvePoint, Fq,
    GtElem, PairGroupElem, Scalar, U256,
};

fn big(u: &U256) -> BigUint {
    BigUint::from_bytes_be(&u.to_be_bytes())
}

fn u256(b: &BigUint) -> U256 {
    let bytes = b.to_bytes_be();
    let mut out = [0u8; 32];
    out[32 - bytes.len()..].copy_from_slice(&bytes);
    U256::from_be_bytes(&out)
}

fn scalar(bytes: [u8; 32]) -> Scalar {
    Scalar::from_be_bytes_reduced(secp256k1(), &bytes)
}

/// Affine arithmetic on the F_17 curve with plain integers.
mod toy_oracle {
    pub const P: i64 = 17;
    pub const A: i64 = 2;
    pub const B: i64 = 2;
    pub type Pt = Option<(i64, i64)>;

    fn m(v: i64) -> i64 {
        v.rem_euclid(P)
    }

    fn inv(v: i64) -> i64 {
        (1..P).find(|i| m(v * i) == 1).expect("nonzero")
    }

    pub fn add(p: Pt, q: Pt) -> Pt {
        let (Some((x1, y1)), Some((x2, y2))) = (p, q) else {
            return p.or(q);
        };
        if x1 == x2 && m(y1 + y2) == 0 {
            return None;
        }
        let l = if (x1, y1) == (x2, y2) {
            m((3 * x1 * x1 + A) * inv(2 * y1))
        } else {
            m((y2 - y1) * inv(x2 - x1))
        };
        let x3 = m(l * l - x1 - x2);
        Some((x3, m(l * (x1 - x3) - y1)))
    }

    pub fn points() -> Vec<Pt> {
        let mut v = vec![None];
        for x in 0..P {
            for y in 0..P {
                if m(y * y) == m(x * x * x + A * x + B) {
                    v.push(Some((x, y)));
                }
            }
        }
        v
    }
}

fn to_oracle(p: &CurvePoint) -> toy_oracle::Pt {
    p.coordinates().map(|(x, y)| (x.low_u64() as i64, y.low_u64() as i64))
}

#[test]
fn toy_curve_has_nineteen_points_and_g_generates_them() {
    let pts = toy_oracle::points();
    assert_eq!(pts.len(), 19);
    let g = CurvePoint::generator(toy_curve());
    let mut acc: toy_oracle::Pt = None;
    let mut seen = Vec::new();
    for k in 0..19u64 {
        let got = g.mul(&Scalar::from_u64(toy_curve(), k));
        assert_eq!(to_oracle(&got), acc, "k = {k}");
        assert!(got.is_on_curve());
        seen.push(acc);
        acc = toy_oracle::add(acc, Some((5, 1)));
    }
    assert_eq!(acc, None, "19 G is the identity");
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 19);
}

#[test]
fn toy_doubling_of_g() {
    let g = CurvePoint::generator(toy_curve());
    assert_eq!(to_oracle(&(g + g)), Some((6, 3)));
    assert_eq!(to_oracle(&g.mul(&Scalar::from_u64(toy_curve(), 2))), Some((6, 3)));
    assert!(g.mul(&Scalar::from_u64(toy_curve(), 0)).is_identity());
}

#[test]
fn toy_addition_table_matches_oracle() {
    let c = toy_curve();
    let g = CurvePoint::generator(c);
    let all: Vec<CurvePoint> = (0..19u64).map(|k| g.mul(&Scalar::from_u64(c, k))).collect();
    for p in &all {
        for q in &all {
            assert_eq!(to_oracle(&point_add(p, q)), toy_oracle::add(to_oracle(p), to_oracle(q)));
        }
        assert!((*p + -*p).is_identity());
        assert_eq!(*p + CurvePoint::identity(c), *p);
    }
}

#[test]
fn secp256k1_small_multiples() {
    let c = secp256k1();
    let g = CurvePoint::generator(c);
    let h = |s| U256::from_hex(s).unwrap();
    let two = g.mul(&Scalar::from_u64(c, 2));
    assert_eq!(
        two.coordinates(),
        Some((
            h("c6047f9441ed7d6d3045406e95c07cd85c778e4b8cef3ca7abac09b95c709ee5"),
            h("1ae168fea63dc339a3c58419466ceaeef7f632653266d0e1236431a950cfe52a"),
        ))
    );
    let three = g.mul(&Scalar::from_u64(c, 3));
    assert_eq!(
        three.coordinates(),
        Some((
            h("f9308a019258c31049344f85f89d5229b531c845836f99b08601f113bce036f9"),
            h("388f7b0f632de8140fe337e62a37f3566500a99934c2231b6cb9fd7584b8e672"),
        ))
    );
    let n_minus_1 = -Scalar::one(c);
    assert_eq!(g.mul(&n_minus_1), -g);
    assert!((g.mul(&n_minus_1) + g).is_identity());
}

#[test]
fn sha256_reference_vectors() {
    assert_eq!(
        hash(b"").to_hex(),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
    assert_eq!(
        hash(b"abc").to_hex(),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
    assert_eq!(hash_concat(&[b"a", b"bc"]), hash(b"abc"));
}

#[test]
fn pairing_examples() {
    let g1 = PairGroupElem::G1(Fq::ONE);
    let g2 = PairGroupElem::G2(Fq::ONE);
    assert_eq!(pair(&g1, &g2).unwrap(), PairGroupElem::Gt(GtElem::generator()));
    assert_eq!(
        pair(&g1.scale(Fq::new(3)), &g2.scale(Fq::new(5))).unwrap(),
        PairGroupElem::Gt(GtElem::gen_pow(Fq::new(15)))
    );
    assert!(pair(&g2, &g1).is_err());
}

const Q: u128 = 0xffff_ffff_0000_0001;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn secp_group_laws(a in any::<[u8; 32]>(), b in any::<[u8; 32]>(), c in any::<[u8; 32]>()) {
        let g = CurvePoint::generator(secp256k1());
        let (a, b, c) = (scalar(a), scalar(b), scalar(c));
        let (p, q, r) = (g.mul(&a), g.mul(&b), g.mul(&c));
        prop_assert_eq!((p + q) + r, p + (q + r));
        prop_assert_eq!(p + q, q + p);
        prop_assert_eq!(g.mul(&(a + b)), p + q);
        prop_assert_eq!(scalar_mul(&(a + b), &r), scalar_mul(&a, &r) + scalar_mul(&b, &r));
        prop_assert_eq!(q.mul(&a), p.mul(&b));
        prop_assert!((p - p).is_identity());
        prop_assert_eq!(p.mul_vartime(&c), p.mul(&c));
        prop_assert_eq!(CurvePoint::lincomb_vartime(&a, &b, &r), g.mul(&a) + r.mul(&b));
        prop_assert!(p.is_on_curve());
    }

    #[test]
    fn xonly_round_trip(a in any::<[u8; 32]>()) {
        let g = CurvePoint::generator(secp256k1());
        let p = g.mul(&scalar(a));
        prop_assume!(!p.is_identity());
        let back = CurvePoint::from_xonly(secp256k1(), &p.to_xonly().unwrap()).unwrap();
        prop_assert_eq!(back, p.normalize_even());
        prop_assert!(back.has_even_y());
    }

    #[test]
    fn field_arithmetic_matches_bigint(a in any::<[u8; 32]>(), b in any::<[u8; 32]>()) {
        let c = secp256k1();
        for f in [c.base_field(), c.scalar_field()] {
            let m = big(f.modulus());
            let x = f.reduce_be_bytes(&a);
            let y = f.reduce_be_bytes(&b);
            let (bx, by) = (big(&x), big(&y));
            prop_assert_eq!(&bx, &(BigUint::from_bytes_be(&a) % &m));
            let prod = f.from_mont(&f.mul(&f.to_mont(&x), &f.to_mont(&y)));
            prop_assert_eq!(big(&prod), (&bx * &by) % &m);
            prop_assert_eq!(big(&f.add(&x, &y)), (&bx + &by) % &m);
            prop_assert_eq!(big(&f.sub(&x, &y)), (&bx + &m - &by) % &m);
            if !x.is_zero() {
                let inv = f.from_mont(&f.invert(&f.to_mont(&x)).unwrap());
                prop_assert_eq!((big(&inv) * &bx) % &m, BigUint::from(1u8));
            }
            let e = u256(&by);
            let pw = f.from_mont(&f.pow(&f.to_mont(&x), &e));
            prop_assert_eq!(big(&pw), bx.modpow(&by, &m));
        }
    }

    #[test]
    fn square_roots_match_bigint(a in any::<[u8; 32]>()) {
        let f = secp256k1().base_field();
        let m = big(f.modulus());
        let x = f.reduce_be_bytes(&a);
        let sq = (big(&x) * big(&x)) % &m;
        let r = f.from_mont(&f.sqrt(&f.to_mont(&u256(&sq))).unwrap());
        prop_assert_eq!((big(&r) * big(&r)) % &m, sq);
    }

    #[test]
    fn pairing_is_bilinear(x in any::<u64>(), y in any::<u64>(), z in any::<u64>()) {
        let (x, y, z) = (Fq::from_i64(x as i64), Fq::from_i64(y as i64), Fq::from_i64(z as i64));
        let g1 = PairGroupElem::generator(zaps_core::arith::GroupTag::G1);
        let g2 = PairGroupElem::generator(zaps_core::arith::GroupTag::G2);
        let lhs = pair(&g1.scale(x), &g2.scale(y)).unwrap();
        prop_assert_eq!(lhs, PairGroupElem::Gt(GtElem::generator().pow(x * y)));
        let sum = pair(&g1.scale(x + z), &g2.scale(y)).unwrap();
        let prod = lhs.combine(&pair(&g1.scale(z), &g2.scale(y)).unwrap()).unwrap();
        prop_assert_eq!(sum, prod);
        let want = (x.value() as u128 * y.value() as u128 % Q) as u64;
        prop_assert_eq!(pairing_exponent(x, y).value(), want);
    }

    #[test]
    fn distinct_inputs_hash_distinctly(a in proptest::collection::vec(any::<u8>(), 0..64), b in proptest::collection::vec(any::<u8>(), 0..64)) {
        prop_assert_eq!(hash(&a) == hash(&b), a == b);
    }
}
