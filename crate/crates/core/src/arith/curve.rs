//! Short-Weierstrass curves `y^2 = x^3 + ax + b` over prime fields.
//!
//! Two parameter sets are compiled in: secp256k1 for the protocol and the
//! toy curve `y^2 = x^3 + 2x + 2` over F_17 (order 19) whose group is small
//! enough to enumerate exhaustively in tests.
//!
//! Secret-scalar multiplication uses a Montgomery ladder over the full bit
//! length of the group order, so the sequence of group operations does not
//! depend on the scalar. Verification-side routines (`*_vartime`) operate on
//! public data only and use windowed / fixed-base tables.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{LazyLock, OnceLock};

use rand::{CryptoRng, RngCore};

use super::u256::{MontField, U256};
use super::ArithError;

/// Published curve parameters: coefficients, field prime, base point, order,
/// hash identifier and the nominal security level.
pub struct DomainParams {
    pub name: &'static str,
    pub p: U256,
    pub n: U256,
    pub a: U256,
    pub b: U256,
    pub gx: U256,
    pub gy: U256,
    pub hash_alg: &'static str,
    pub security_bits: u32,
    fp: MontField,
    fn_: MontField,
    a_m: U256,
    b_m: U256,
    fixed_base: OnceLock<Vec<Vec<Jacobian>>>,
}

impl fmt::Debug for DomainParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainParams")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for DomainParams {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl DomainParams {
    fn build(
        name: &'static str,
        p: U256,
        n: U256,
        a: U256,
        b: U256,
        g: (U256, U256),
        security_bits: u32,
    ) -> Self {
        let fp = MontField::new(p);
        let fn_ = MontField::new(n);
        let a_m = fp.to_mont(&a);
        let b_m = fp.to_mont(&b);
        DomainParams {
            name,
            p,
            n,
            a,
            b,
            gx: g.0,
            gy: g.1,
            hash_alg: "SHA-256",
            security_bits,
            fp,
            fn_,
            a_m,
            b_m,
            fixed_base: OnceLock::new(),
        }
    }

    /// `4a^3 + 27b^2 != 0 (mod p)`
    pub fn is_nonsingular(&self) -> bool {
        let f = &self.fp;
        let a3 = f.mul(&f.square(&self.a_m), &self.a_m);
        let b2 = f.square(&self.b_m);
        let four = f.to_mont(&U256::from_u64(4));
        let t27 = f.to_mont(&U256::from_u64(27));
        let d = f.add(&f.mul(&four, &a3), &f.mul(&t27, &b2));
        !d.is_zero()
    }

    pub fn base_field(&self) -> &MontField {
        &self.fp
    }

    pub fn scalar_field(&self) -> &MontField {
        &self.fn_
    }

    /// Bit length of the group order; the ladder always runs this many steps.
    pub fn order_bits(&self) -> usize {
        self.n.bits()
    }

    fn generator_jac(&self) -> Jacobian {
        Jacobian {
            x: self.fp.to_mont(&self.gx),
            y: self.fp.to_mont(&self.gy),
            z: self.fp.one(),
        }
    }

    /// Right-hand side `x^3 + ax + b` for a Montgomery-form `x`.
    fn rhs(&self, x: &U256) -> U256 {
        let f = &self.fp;
        let x3 = f.mul(&f.square(x), x);
        f.add(&f.add(&x3, &f.mul(&self.a_m, x)), &self.b_m)
    }

    /// Table of `j * 16^i * G` for the fixed-base verifier path.
    fn fixed_base_table(&self) -> &Vec<Vec<Jacobian>> {
        self.fixed_base.get_or_init(|| {
            let windows = self.order_bits().div_ceil(4);
            let mut table = Vec::with_capacity(windows);
            let mut base = self.generator_jac();
            for _ in 0..windows {
                let mut row = Vec::with_capacity(16);
                let mut acc = Jacobian::IDENTITY;
                for _ in 0..16 {
                    row.push(acc);
                    acc = jac_add(self, &acc, &base);
                }
                table.push(row);
                for _ in 0..4 {
                    base = jac_double(self, &base);
                }
            }
            table
        })
    }
}

static SECP256K1: LazyLock<DomainParams> = LazyLock::new(|| {
    let h = |s| U256::from_hex(s).unwrap();
    let params = DomainParams::build(
        "secp256k1",
        h("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f"),
        h("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141"),
        U256::ZERO,
        U256::from_u64(7),
        (
            h("79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798"),
            h("483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8"),
        ),
        128,
    );
    debug_assert!(params.is_nonsingular());
    params
});

static TOY17: LazyLock<DomainParams> = LazyLock::new(|| {
    DomainParams::build(
        "toy-f17",
        U256::from_u64(17),
        U256::from_u64(19),
        U256::from_u64(2),
        U256::from_u64(2),
        (U256::from_u64(5), U256::from_u64(1)),
        4,
    )
});

/// The production curve.
pub fn secp256k1() -> &'static DomainParams {
    &SECP256K1
}

/// `y^2 = x^3 + 2x + 2` over F_17 with base point (5, 1) of prime order 19.
pub fn toy_curve() -> &'static DomainParams {
    &TOY17
}

// ---------------------------------------------------------------------------
// Scalars

/// An integer modulo the group order `n`, stored canonically.
#[derive(Clone, Copy)]
pub struct Scalar {
    curve: &'static DomainParams,
    v: U256,
}

impl Scalar {
    pub fn new(curve: &'static DomainParams, v: U256) -> Self {
        Scalar {
            curve,
            v: curve.fn_.reduce(&v),
        }
    }

    pub fn from_u64(curve: &'static DomainParams, v: u64) -> Self {
        Self::new(curve, U256::from_u64(v))
    }

    pub fn zero(curve: &'static DomainParams) -> Self {
        Scalar { curve, v: U256::ZERO }
    }

    pub fn one(curve: &'static DomainParams) -> Self {
        Scalar { curve, v: U256::ONE }
    }

    /// Reduces an arbitrary big-endian byte string modulo `n`.
    pub fn from_be_bytes_reduced(curve: &'static DomainParams, bytes: &[u8]) -> Self {
        Scalar {
            curve,
            v: curve.fn_.reduce_be_bytes(bytes),
        }
    }

    /// Canonical decoding: rejects values `>= n`.
    pub fn from_be_bytes(curve: &'static DomainParams, bytes: &[u8; 32]) -> Option<Self> {
        let v = U256::from_be_bytes(bytes);
        (v < curve.n).then_some(Scalar { curve, v })
    }

    /// Uniform in `[1, n-1]` by rejection sampling.
    pub fn random<R: RngCore + CryptoRng>(curve: &'static DomainParams, rng: &mut R) -> Self {
        let bits = curve.order_bits();
        loop {
            let mut buf = [0u8; 32];
            rng.fill_bytes(&mut buf);
            let mut v = U256::from_be_bytes(&buf);
            // mask to the bit length of n
            for i in bits..256 {
                v.0[i / 64] &= !(1u64 << (i % 64));
            }
            if !v.is_zero() && v < curve.n {
                return Scalar { curve, v };
            }
        }
    }

    pub fn curve(&self) -> &'static DomainParams {
        self.curve
    }

    pub fn value(&self) -> U256 {
        self.v
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.v.to_be_bytes()
    }

    pub fn invert(&self) -> Option<Scalar> {
        let f = &self.curve.fn_;
        let inv = f.invert(&f.to_mont(&self.v))?;
        Some(Scalar {
            curve: self.curve,
            v: f.from_mont(&inv),
        })
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.curve == other.curve && self.v == other.v
    }
}
impl Eq for Scalar {}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({}, {:?})", self.curve.name, self.v)
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        assert!(self.curve == rhs.curve, "scalar curve mismatch");
        Scalar {
            curve: self.curve,
            v: self.curve.fn_.add(&self.v, &rhs.v),
        }
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        assert!(self.curve == rhs.curve, "scalar curve mismatch");
        Scalar {
            curve: self.curve,
            v: self.curve.fn_.sub(&self.v, &rhs.v),
        }
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        assert!(self.curve == rhs.curve, "scalar curve mismatch");
        let f = &self.curve.fn_;
        // mont(a) * b * R^-1 = a * b
        Scalar {
            curve: self.curve,
            v: f.mul(&f.to_mont(&self.v), &rhs.v),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            curve: self.curve,
            v: self.curve.fn_.neg(&self.v),
        }
    }
}

// ---------------------------------------------------------------------------
// Jacobian internals (Montgomery-form coordinates, z = 0 for identity)

#[derive(Clone, Copy, Debug)]
struct Jacobian {
    x: U256,
    y: U256,
    z: U256,
}

impl Jacobian {
    const IDENTITY: Jacobian = Jacobian {
        x: U256::ZERO,
        y: U256::ZERO,
        z: U256::ZERO,
    };

    fn is_identity(&self) -> bool {
        self.z.is_zero()
    }
}

fn jac_double(c: &DomainParams, p: &Jacobian) -> Jacobian {
    if p.is_identity() || p.y.is_zero() {
        return Jacobian::IDENTITY;
    }
    let f = &c.fp;
    let xx = f.square(&p.x);
    let yy = f.square(&p.y);
    let yyyy = f.square(&yy);
    let zz = f.square(&p.z);
    let s = f.double(&f.sub(&f.sub(&f.square(&f.add(&p.x, &yy)), &xx), &yyyy));
    let mut m = f.add(&f.double(&xx), &xx);
    if !c.a.is_zero() {
        m = f.add(&m, &f.mul(&c.a_m, &f.square(&zz)));
    }
    let t = f.sub(&f.square(&m), &f.double(&s));
    let yyyy8 = f.double(&f.double(&f.double(&yyyy)));
    let y3 = f.sub(&f.mul(&m, &f.sub(&s, &t)), &yyyy8);
    let z3 = f.sub(&f.sub(&f.square(&f.add(&p.y, &p.z)), &yy), &zz);
    Jacobian { x: t, y: y3, z: z3 }
}

fn jac_add(c: &DomainParams, p: &Jacobian, q: &Jacobian) -> Jacobian {
    if p.is_identity() {
        return *q;
    }
    if q.is_identity() {
        return *p;
    }
    let f = &c.fp;
    let z1z1 = f.square(&p.z);
    let z2z2 = f.square(&q.z);
    let u1 = f.mul(&p.x, &z2z2);
    let u2 = f.mul(&q.x, &z1z1);
    let s1 = f.mul(&f.mul(&p.y, &q.z), &z2z2);
    let s2 = f.mul(&f.mul(&q.y, &p.z), &z1z1);
    if u1 == u2 {
        return if s1 == s2 {
            jac_double(c, p)
        } else {
            Jacobian::IDENTITY
        };
    }
    let h = f.sub(&u2, &u1);
    let i = f.square(&f.double(&h));
    let j = f.mul(&h, &i);
    let r = f.double(&f.sub(&s2, &s1));
    let v = f.mul(&u1, &i);
    let x3 = f.sub(&f.sub(&f.square(&r), &j), &f.double(&v));
    let y3 = f.sub(&f.mul(&r, &f.sub(&v, &x3)), &f.double(&f.mul(&s1, &j)));
    let z3 = f.mul(
        &f.sub(&f.sub(&f.square(&f.add(&p.z, &q.z)), &z1z1), &z2z2),
        &h,
    );
    Jacobian { x: x3, y: y3, z: z3 }
}

fn jac_neg(c: &DomainParams, p: &Jacobian) -> Jacobian {
    Jacobian {
        x: p.x,
        y: c.fp.neg(&p.y),
        z: p.z,
    }
}

fn cswap(a: &mut Jacobian, b: &mut Jacobian, swap: bool) {
    let mask = (swap as u64).wrapping_neg();
    for (u, v) in [(&mut a.x, &mut b.x), (&mut a.y, &mut b.y), (&mut a.z, &mut b.z)] {
        for k in 0..4 {
            let t = mask & (u.0[k] ^ v.0[k]);
            u.0[k] ^= t;
            v.0[k] ^= t;
        }
    }
}

fn ladder(c: &DomainParams, k: &U256, p: &Jacobian) -> Jacobian {
    let mut r0 = Jacobian::IDENTITY;
    let mut r1 = *p;
    for i in (0..c.order_bits()).rev() {
        let bit = k.bit(i);
        cswap(&mut r0, &mut r1, bit);
        r1 = jac_add(c, &r0, &r1);
        r0 = jac_double(c, &r0);
        cswap(&mut r0, &mut r1, bit);
    }
    r0
}

/// Width-4 NAF digits, least significant first.
fn wnaf4(k: &U256) -> Vec<i8> {
    let mut k = *k;
    let mut out = Vec::with_capacity(257);
    while !k.is_zero() {
        if k.is_odd() {
            let low = (k.0[0] & 0xf) as i8;
            let d = if low >= 8 { low - 16 } else { low };
            if d > 0 {
                k = k.overflowing_sub(&U256::from_u64(d as u64)).0;
            } else {
                k = k.overflowing_add(&U256::from_u64((-d) as u64)).0;
            }
            out.push(d);
        } else {
            out.push(0);
        }
        k = k.shr1();
    }
    out
}

fn mul_vartime_jac(c: &DomainParams, k: &U256, p: &Jacobian) -> Jacobian {
    // odd multiples P, 3P, 5P, 7P
    let p2 = jac_double(c, p);
    let mut odd = [*p; 4];
    for i in 1..4 {
        odd[i] = jac_add(c, &odd[i - 1], &p2);
    }
    let digits = wnaf4(k);
    let mut acc = Jacobian::IDENTITY;
    for &d in digits.iter().rev() {
        acc = jac_double(c, &acc);
        if d > 0 {
            acc = jac_add(c, &acc, &odd[(d as usize) / 2]);
        } else if d < 0 {
            acc = jac_add(c, &acc, &jac_neg(c, &odd[((-d) as usize) / 2]));
        }
    }
    acc
}

fn fixed_base_vartime(c: &DomainParams, k: &U256) -> Jacobian {
    let table = c.fixed_base_table();
    let mut acc = Jacobian::IDENTITY;
    for (i, row) in table.iter().enumerate() {
        let nib = ((k.0[(4 * i) / 64] >> ((4 * i) % 64)) & 0xf) as usize;
        if nib != 0 {
            acc = jac_add(c, &acc, &row[nib]);
        }
    }
    acc
}

fn cmov(dst: &mut Jacobian, src: &Jacobian, pick: bool) {
    let mask = (pick as u64).wrapping_neg();
    for (u, v) in [(&mut dst.x, &src.x), (&mut dst.y, &src.y), (&mut dst.z, &src.z)] {
        for k in 0..4 {
            u.0[k] ^= mask & (u.0[k] ^ v.0[k]);
        }
    }
}

/// `k * G` from the window table; every entry of a row is scanned so the
/// memory access pattern does not depend on `k`.
fn fixed_base(c: &DomainParams, k: &U256) -> Jacobian {
    let table = c.fixed_base_table();
    let mut acc = Jacobian::IDENTITY;
    for (i, row) in table.iter().enumerate() {
        let nib = ((k.0[(4 * i) / 64] >> ((4 * i) % 64)) & 0xf) as usize;
        let mut sel = Jacobian::IDENTITY;
        for (j, e) in row.iter().enumerate() {
            cmov(&mut sel, e, j == nib);
        }
        acc = jac_add(c, &acc, &sel);
    }
    acc
}

// ---------------------------------------------------------------------------
// Affine points

/// A point of `E_p(a, b)` or the identity `O`.
#[derive(Clone, Copy)]
pub struct CurvePoint {
    curve: &'static DomainParams,
    /// Montgomery-form affine coordinates; `None` is the identity.
    xy: Option<(U256, U256)>,
}

impl CurvePoint {
    pub fn identity(curve: &'static DomainParams) -> Self {
        CurvePoint { curve, xy: None }
    }

    pub fn generator(curve: &'static DomainParams) -> Self {
        CurvePoint {
            curve,
            xy: Some((curve.fp.to_mont(&curve.gx), curve.fp.to_mont(&curve.gy))),
        }
    }

    /// Builds a point from canonical coordinates, checking the curve equation.
    pub fn from_affine(curve: &'static DomainParams, x: U256, y: U256) -> Result<Self, ArithError> {
        if x >= curve.p || y >= curve.p {
            return Err(ArithError::OffCurve);
        }
        let f = &curve.fp;
        let (xm, ym) = (f.to_mont(&x), f.to_mont(&y));
        if f.square(&ym) != curve.rhs(&xm) {
            return Err(ArithError::OffCurve);
        }
        Ok(CurvePoint {
            curve,
            xy: Some((xm, ym)),
        })
    }

    pub fn curve(&self) -> &'static DomainParams {
        self.curve
    }

    pub fn is_identity(&self) -> bool {
        self.xy.is_none()
    }

    pub fn is_on_curve(&self) -> bool {
        match self.xy {
            None => true,
            Some((x, y)) => self.curve.fp.square(&y) == self.curve.rhs(&x),
        }
    }

    /// Canonical affine coordinates, `None` for the identity.
    pub fn coordinates(&self) -> Option<(U256, U256)> {
        self.xy
            .map(|(x, y)| (self.curve.fp.from_mont(&x), self.curve.fp.from_mont(&y)))
    }

    pub fn x(&self) -> Option<U256> {
        self.coordinates().map(|c| c.0)
    }

    pub fn has_even_y(&self) -> bool {
        self.coordinates().is_some_and(|(_, y)| !y.is_odd())
    }

    /// Returns whichever of `P` and `-P` has an even y-coordinate.
    pub fn normalize_even(&self) -> Self {
        if self.is_identity() || self.has_even_y() {
            *self
        } else {
            -*self
        }
    }

    /// 32-byte big-endian x-coordinate; the identity has no encoding.
    pub fn to_xonly(&self) -> Result<[u8; 32], ArithError> {
        self.x()
            .map(|x| x.to_be_bytes())
            .ok_or(ArithError::IdentityEncoding)
    }

    /// Lifts an x-coordinate to the point with even y.
    pub fn from_xonly(curve: &'static DomainParams, bytes: &[u8; 32]) -> Result<Self, ArithError> {
        let x = U256::from_be_bytes(bytes);
        if x >= curve.p {
            return Err(ArithError::InvalidEncoding);
        }
        let f = &curve.fp;
        let xm = f.to_mont(&x);
        let ym = f.sqrt(&curve.rhs(&xm)).ok_or(ArithError::InvalidEncoding)?;
        let y = f.from_mont(&ym);
        let ym = if y.is_odd() { f.neg(&ym) } else { ym };
        Ok(CurvePoint {
            curve,
            xy: Some((xm, ym)),
        })
    }

    fn to_jac(self) -> Jacobian {
        match self.xy {
            None => Jacobian::IDENTITY,
            Some((x, y)) => Jacobian {
                x,
                y,
                z: self.curve.fp.one(),
            },
        }
    }

    fn from_jac(curve: &'static DomainParams, p: &Jacobian) -> Self {
        if p.is_identity() {
            return Self::identity(curve);
        }
        let f = &curve.fp;
        let zinv = f.invert(&p.z).expect("nonzero z");
        let zinv2 = f.square(&zinv);
        let x = f.mul(&p.x, &zinv2);
        let y = f.mul(&p.y, &f.mul(&zinv2, &zinv));
        CurvePoint {
            curve,
            xy: Some((x, y)),
        }
    }

    /// `k * P` by Montgomery ladder (operation sequence independent of `k`),
    /// or by the fixed-base table when `P = G`.
    pub fn mul(&self, k: &Scalar) -> Self {
        assert!(self.curve == k.curve, "curve mismatch");
        if *self == Self::generator(self.curve) {
            return Self::from_jac(self.curve, &fixed_base(self.curve, &k.v));
        }
        Self::from_jac(self.curve, &ladder(self.curve, &k.v, &self.to_jac()))
    }

    /// `k * P` for public `k`.
    pub fn mul_vartime(&self, k: &Scalar) -> Self {
        assert!(self.curve == k.curve, "curve mismatch");
        Self::from_jac(self.curve, &mul_vartime_jac(self.curve, &k.v, &self.to_jac()))
    }

    /// `a * G + b * Q` for public scalars.
    pub fn lincomb_vartime(a: &Scalar, b: &Scalar, q: &CurvePoint) -> Self {
        let c = q.curve;
        let ag = fixed_base_vartime(c, &a.v);
        let bq = mul_vartime_jac(c, &b.v, &q.to_jac());
        Self::from_jac(c, &jac_add(c, &ag, &bq))
    }
}

impl PartialEq for CurvePoint {
    fn eq(&self, other: &Self) -> bool {
        self.curve == other.curve && self.xy == other.xy
    }
}
impl Eq for CurvePoint {}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.coordinates() {
            None => write!(f, "CurvePoint({}, O)", self.curve.name),
            Some((x, y)) => write!(f, "CurvePoint({}, {:?}, {:?})", self.curve.name, x, y),
        }
    }
}

impl Add for CurvePoint {
    type Output = CurvePoint;
    fn add(self, rhs: CurvePoint) -> CurvePoint {
        assert!(self.curve == rhs.curve, "curve mismatch");
        Self::from_jac(self.curve, &jac_add(self.curve, &self.to_jac(), &rhs.to_jac()))
    }
}

impl Neg for CurvePoint {
    type Output = CurvePoint;
    fn neg(self) -> CurvePoint {
        CurvePoint {
            curve: self.curve,
            xy: self.xy.map(|(x, y)| (x, self.curve.fp.neg(&y))),
        }
    }
}

impl Sub for CurvePoint {
    type Output = CurvePoint;
    fn sub(self, rhs: CurvePoint) -> CurvePoint {
        self + (-rhs)
    }
}

/// `k * P`.
pub fn scalar_mul(k: &Scalar, p: &CurvePoint) -> CurvePoint {
    p.mul(k)
}

/// Group law.
pub fn point_add(p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
    *p + *q
}
