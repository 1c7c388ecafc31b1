//! Pedagogical bilinear group for the QAP backend.
//!
//! G1 and G2 are cyclic groups of prime order `q = 2^64 - 2^32 + 1`
//! represented transparently by their discrete logarithms: the element
//! `x * g1` is stored as `x`. GT is the order-`q` subgroup of `F_P^*` for a
//! 126-bit prime `P = kq + 1`, and `e(x g1, y g2) = gt^(xy)`.
//!
//! Because G1/G2 expose their exponents, anyone can forge anything; this
//! exists only to execute the pairing-check algebra faithfully at desk scale.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::LazyLock;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::u256::{MontField, U256};
use super::ArithError;

/// The SNARK field modulus (Goldilocks prime).
pub const Q: u64 = 0xffff_ffff_0000_0001;
const EPSILON: u64 = 0xffff_ffff;

/// Element of F_q, stored canonically.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fq(u64);

#[inline(always)]
fn reduce128(x: u128) -> u64 {
    let lo = x as u64;
    let hi = (x >> 64) as u64;
    let hi_hi = hi >> 32;
    let hi_lo = hi & EPSILON;
    let (mut t0, borrow) = lo.overflowing_sub(hi_hi);
    if borrow {
        t0 = t0.wrapping_sub(EPSILON);
    }
    let t1 = hi_lo * EPSILON;
    let (mut res, carry) = t0.overflowing_add(t1);
    if carry {
        res = res.wrapping_add(EPSILON);
    }
    if res >= Q {
        res - Q
    } else {
        res
    }
}

impl Fq {
    pub const ZERO: Fq = Fq(0);
    pub const ONE: Fq = Fq(1);

    pub const fn new(v: u64) -> Self {
        Fq(if v >= Q { v - Q } else { v })
    }

    pub fn from_i64(v: i64) -> Self {
        if v >= 0 {
            Fq::new(v as u64)
        } else {
            -Fq::new(v.unsigned_abs())
        }
    }

    /// Canonical decoding; `None` when `v >= q`.
    pub fn from_canonical(v: u64) -> Option<Self> {
        (v < Q).then_some(Fq(v))
    }

    /// Reduces an arbitrary byte string (big-endian) into the field.
    pub fn from_be_bytes_reduced(bytes: &[u8]) -> Self {
        let mut acc = Fq::ZERO;
        let base = Fq::new(256);
        for b in bytes {
            acc = acc * base + Fq::new(*b as u64);
        }
        acc
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v = rng.next_u64();
            if v < Q {
                return Fq(v);
            }
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn pow(self, mut e: u64) -> Fq {
        let mut base = self;
        let mut acc = Fq::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn inverse(self) -> Option<Fq> {
        (!self.is_zero()).then(|| self.pow(Q - 2))
    }

    /// Primitive `2^log_n`-th root of unity (multiplicative generator 7).
    pub fn root_of_unity(log_n: u32) -> Fq {
        assert!(log_n <= 32, "two-adicity of q is 32");
        Fq::new(7).pow((Q - 1) >> log_n)
    }
}

impl fmt::Debug for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fq({})", self.0)
    }
}

impl fmt::Display for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Fq {
    type Output = Fq;
    #[inline]
    fn add(self, rhs: Fq) -> Fq {
        let (s, carry) = self.0.overflowing_add(rhs.0);
        let (mut s, carry2) = s.overflowing_add(if carry { EPSILON } else { 0 });
        if carry2 {
            s += EPSILON;
        }
        Fq(if s >= Q { s - Q } else { s })
    }
}

impl Sub for Fq {
    type Output = Fq;
    #[inline]
    fn sub(self, rhs: Fq) -> Fq {
        let (d, borrow) = self.0.overflowing_sub(rhs.0);
        Fq(if borrow { d.wrapping_add(Q) } else { d })
    }
}

impl Neg for Fq {
    type Output = Fq;
    fn neg(self) -> Fq {
        Fq::ZERO - self
    }
}

impl Mul for Fq {
    type Output = Fq;
    #[inline]
    fn mul(self, rhs: Fq) -> Fq {
        Fq(reduce128(self.0 as u128 * rhs.0 as u128))
    }
}

impl std::iter::Sum for Fq {
    fn sum<I: Iterator<Item = Fq>>(iter: I) -> Fq {
        iter.fold(Fq::ZERO, |a, b| a + b)
    }
}

// ---------------------------------------------------------------------------
// Target group

struct GtGroup {
    field: MontField,
    generator: U256,
}

static GT: LazyLock<GtGroup> = LazyLock::new(|| {
    // P = 4611686018427387942 * q + 1, gt = 2^((P-1)/q) mod P
    let p = U256::from_hex("3fffffffc00000263fffffda00000027").unwrap();
    let g = U256::from_hex("04e0fdd13e3458a65bec2c62751a8131").unwrap();
    let field = MontField::new(p);
    let generator = field.to_mont(&g);
    GtGroup { field, generator }
});

/// Element of GT (Montgomery form modulo P).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct GtElem(U256);

impl GtElem {
    pub fn generator() -> Self {
        GtElem(GT.generator)
    }

    pub fn identity() -> Self {
        GtElem(GT.field.one())
    }

    /// `gt^e`.
    pub fn gen_pow(e: Fq) -> Self {
        Self::generator().pow(e)
    }

    pub fn pow(&self, e: Fq) -> Self {
        GtElem(GT.field.pow(&self.0, &U256::from_u64(e.value())))
    }

    pub fn mul(&self, other: &GtElem) -> Self {
        GtElem(GT.field.mul(&self.0, &other.0))
    }

    pub fn canonical(&self) -> U256 {
        GT.field.from_mont(&self.0)
    }
}

impl fmt::Debug for GtElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GtElem({:?})", self.canonical())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupTag {
    G1,
    G2,
    GT,
}

/// A tagged element of G1, G2 or GT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairGroupElem {
    G1(Fq),
    G2(Fq),
    Gt(GtElem),
}

impl PairGroupElem {
    pub fn generator(tag: GroupTag) -> Self {
        match tag {
            GroupTag::G1 => PairGroupElem::G1(Fq::ONE),
            GroupTag::G2 => PairGroupElem::G2(Fq::ONE),
            GroupTag::GT => PairGroupElem::Gt(GtElem::generator()),
        }
    }

    pub fn identity(tag: GroupTag) -> Self {
        match tag {
            GroupTag::G1 => PairGroupElem::G1(Fq::ZERO),
            GroupTag::G2 => PairGroupElem::G2(Fq::ZERO),
            GroupTag::GT => PairGroupElem::Gt(GtElem::identity()),
        }
    }

    pub fn tag(&self) -> GroupTag {
        match self {
            PairGroupElem::G1(_) => GroupTag::G1,
            PairGroupElem::G2(_) => GroupTag::G2,
            PairGroupElem::Gt(_) => GroupTag::GT,
        }
    }

    /// `k` applied to the element (additive notation for G1/G2, power for GT).
    pub fn scale(&self, k: Fq) -> Self {
        match self {
            PairGroupElem::G1(x) => PairGroupElem::G1(*x * k),
            PairGroupElem::G2(x) => PairGroupElem::G2(*x * k),
            PairGroupElem::Gt(g) => PairGroupElem::Gt(g.pow(k)),
        }
    }

    /// The group operation between two elements of the same group.
    pub fn combine(&self, other: &Self) -> Result<Self, ArithError> {
        match (self, other) {
            (PairGroupElem::G1(a), PairGroupElem::G1(b)) => Ok(PairGroupElem::G1(*a + *b)),
            (PairGroupElem::G2(a), PairGroupElem::G2(b)) => Ok(PairGroupElem::G2(*a + *b)),
            (PairGroupElem::Gt(a), PairGroupElem::Gt(b)) => Ok(PairGroupElem::Gt(a.mul(b))),
            _ => Err(ArithError::PairingDomain),
        }
    }

    /// Discrete log w.r.t. the group generator; only G1/G2 are transparent.
    pub fn exponent(&self) -> Option<Fq> {
        match self {
            PairGroupElem::G1(x) | PairGroupElem::G2(x) => Some(*x),
            PairGroupElem::Gt(_) => None,
        }
    }
}

/// `e: G1 x G2 -> GT`.
pub fn pair(a: &PairGroupElem, b: &PairGroupElem) -> Result<PairGroupElem, ArithError> {
    match (a, b) {
        (PairGroupElem::G1(x), PairGroupElem::G2(y)) => Ok(PairGroupElem::Gt(GtElem::gen_pow(*x * *y))),
        _ => Err(ArithError::PairingDomain),
    }
}

/// The GT exponent of `e(a, b)`, i.e. the product of the two logs.
pub fn pairing_exponent(a: Fq, b: Fq) -> Fq {
    a * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn q_arithmetic_edges() {
        let m1 = Fq::new(Q - 1);
        assert_eq!(m1 + Fq::ONE, Fq::ZERO);
        assert_eq!(m1 * m1, Fq::ONE);
        assert_eq!(Fq::ZERO - Fq::ONE, m1);
        assert_eq!(Fq::new(Q), Fq::ZERO);
        let w = Fq::root_of_unity(32);
        assert_eq!(w.pow(1 << 31), m1);
        assert_eq!(w.pow(1 << 32), Fq::ONE);
    }

    #[test]
    fn gt_has_order_q() {
        let g = GtElem::generator();
        assert_ne!(g, GtElem::identity());
        assert_eq!(GT.field.pow(&g.0, &U256::from_u64(Q)), GT.field.one());
    }

    #[test]
    fn pairing_examples() {
        let g1 = PairGroupElem::generator(GroupTag::G1);
        let g2 = PairGroupElem::generator(GroupTag::G2);
        assert_eq!(pair(&g1, &g2).unwrap(), PairGroupElem::generator(GroupTag::GT));
        let e = pair(&g1.scale(Fq::new(3)), &g2.scale(Fq::new(5))).unwrap();
        assert_eq!(e, PairGroupElem::generator(GroupTag::GT).scale(Fq::new(15)));
        assert_eq!(pair(&g2, &g1), Err(ArithError::PairingDomain));
        assert_eq!(pair(&g1, &g1), Err(ArithError::PairingDomain));
        assert!(g1.combine(&g2).is_err());
    }

    proptest! {
        #[test]
        fn field_mul_matches_u128(a in 0..Q, b in 0..Q) {
            let expect = ((a as u128 * b as u128) % Q as u128) as u64;
            prop_assert_eq!((Fq::new(a) * Fq::new(b)).value(), expect);
            let sum = ((a as u128 + b as u128) % Q as u128) as u64;
            prop_assert_eq!((Fq::new(a) + Fq::new(b)).value(), sum);
        }

        #[test]
        fn bilinearity(x in 0..Q, y in 0..Q, z in 0..Q) {
            let (x, y, z) = (Fq::new(x), Fq::new(y), Fq::new(z));
            let g1 = PairGroupElem::generator(GroupTag::G1);
            let g2 = PairGroupElem::generator(GroupTag::G2);
            let base = pair(&g1, &g2).unwrap();
            prop_assert_eq!(pair(&g1.scale(x), &g2.scale(y)).unwrap(), base.scale(x * y));
            let lhs = pair(&g1.scale(x + z), &g2.scale(y)).unwrap();
            let rhs = pair(&g1.scale(x), &g2.scale(y)).unwrap()
                .combine(&pair(&g1.scale(z), &g2.scale(y)).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(pairing_exponent(x + z, y), pairing_exponent(x, y) + pairing_exponent(z, y));
        }
    }
}
