//! Fixed-width 256-bit integers and Montgomery arithmetic over an arbitrary
//! odd modulus below 2^256.
//!
//! One implementation serves every prime field in the crate: the secp256k1
//! base and scalar fields, the F_17 toy curve used by the oracle tests, and
//! the target group of the pedagogical pairing.

use std::cmp::Ordering;
use std::fmt;

/// Little-endian 64-bit limbs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U256(pub [u64; 4]);

#[inline(always)]
fn adc(a: u64, b: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + b as u128 + carry as u128;
    (t as u64, (t >> 64) as u64)
}

#[inline(always)]
fn sbb(a: u64, b: u64, borrow: u64) -> (u64, u64) {
    let t = (a as u128).wrapping_sub(b as u128 + (borrow >> 63) as u128);
    (t as u64, (t >> 64) as u64)
}

/// a + b * c + carry
#[inline(always)]
fn mac(a: u64, b: u64, c: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + (b as u128) * (c as u128) + carry as u128;
    (t as u64, (t >> 64) as u64)
}

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);

    pub const fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    /// Parses a big-endian hex string of at most 64 digits.
    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.trim_start_matches("0x");
        if s.is_empty() || s.len() > 64 {
            return None;
        }
        let padded = format!("{s:0>64}");
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(padded, &mut bytes).ok()?;
        Some(Self::from_be_bytes(&bytes))
    }

    pub fn from_be_bytes(b: &[u8; 32]) -> Self {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = 32 - 8 * (i + 1);
            *limb = u64::from_be_bytes(b[start..start + 8].try_into().unwrap());
        }
        U256(limbs)
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for i in 0..4 {
            let start = 32 - 8 * (i + 1);
            out[start..start + 8].copy_from_slice(&self.0[i].to_be_bytes());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn is_odd(&self) -> bool {
        self.0[0] & 1 == 1
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Position of the highest set bit plus one; zero for zero.
    pub fn bits(&self) -> usize {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i + 64 - self.0[i].leading_zeros() as usize;
            }
        }
        0
    }

    /// Returns `(self + rhs, carry)`.
    pub fn overflowing_add(&self, rhs: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut carry = 0;
        for (i, o) in out.iter_mut().enumerate() {
            (*o, carry) = adc(self.0[i], rhs.0[i], carry);
        }
        (U256(out), carry != 0)
    }

    /// Returns `(self - rhs, borrow)`.
    pub fn overflowing_sub(&self, rhs: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut borrow = 0;
        for (i, o) in out.iter_mut().enumerate() {
            (*o, borrow) = sbb(self.0[i], rhs.0[i], borrow);
        }
        (U256(out), borrow != 0)
    }

    pub fn shr1(&self) -> U256 {
        let mut out = [0u64; 4];
        for (i, o) in out.iter_mut().enumerate() {
            let hi = if i < 3 { self.0[i + 1] << 63 } else { 0 };
            *o = (self.0[i] >> 1) | hi;
        }
        U256(out)
    }

    pub fn low_u64(&self) -> u64 {
        self.0[0]
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.to_be_bytes()))
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Montgomery context for an odd modulus `m < 2^256`.
///
/// Values handed to `mul`/`square` must already be reduced and in Montgomery
/// form; `add`, `sub` and `neg` work in either representation.
#[derive(Clone, Debug)]
pub struct MontField {
    modulus: U256,
    inv: u64,
    r2: U256,
    one: U256,
}

impl MontField {
    pub fn new(modulus: U256) -> Self {
        assert!(modulus.is_odd(), "Montgomery modulus must be odd");
        assert!(modulus > U256::ONE, "modulus must exceed one");
        // Newton iteration for m0^{-1} mod 2^64.
        let m0 = modulus.0[0];
        let mut inv = 1u64;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m0.wrapping_mul(inv)));
        }
        let inv = inv.wrapping_neg();

        // R mod m and R^2 mod m by repeated doubling from 1.
        let mut acc = U256::ONE;
        let mut one = U256::ZERO;
        for i in 1..=512 {
            acc = Self::add_mod(&acc, &acc, &modulus);
            if i == 256 {
                one = acc;
            }
        }
        MontField {
            modulus,
            inv,
            r2: acc,
            one,
        }
    }

    pub fn modulus(&self) -> &U256 {
        &self.modulus
    }

    fn add_mod(a: &U256, b: &U256, m: &U256) -> U256 {
        let (s, carry) = a.overflowing_add(b);
        if carry || s >= *m {
            s.overflowing_sub(m).0
        } else {
            s
        }
    }

    pub fn add(&self, a: &U256, b: &U256) -> U256 {
        Self::add_mod(a, b, &self.modulus)
    }

    pub fn sub(&self, a: &U256, b: &U256) -> U256 {
        let (d, borrow) = a.overflowing_sub(b);
        if borrow {
            d.overflowing_add(&self.modulus).0
        } else {
            d
        }
    }

    pub fn neg(&self, a: &U256) -> U256 {
        if a.is_zero() {
            *a
        } else {
            self.modulus.overflowing_sub(a).0
        }
    }

    pub fn double(&self, a: &U256) -> U256 {
        self.add(a, a)
    }

    /// Montgomery product `a * b * R^{-1} mod m` (CIOS).
    #[allow(clippy::needless_range_loop)]
    pub fn mul(&self, a: &U256, b: &U256) -> U256 {
        let p = &self.modulus.0;
        let mut t = [0u64; 6];
        for i in 0..4 {
            let mut c = 0;
            for j in 0..4 {
                (t[j], c) = mac(t[j], a.0[j], b.0[i], c);
            }
            let (t4, c2) = adc(t[4], c, 0);
            t[4] = t4;
            t[5] = c2;

            let m = t[0].wrapping_mul(self.inv);
            let (_, mut c) = mac(t[0], m, p[0], 0);
            for j in 1..4 {
                (t[j - 1], c) = mac(t[j], m, p[j], c);
            }
            let (t3, c3) = adc(t[4], c, 0);
            t[3] = t3;
            t[4] = t[5] + c3;
        }
        let r = U256([t[0], t[1], t[2], t[3]]);
        if t[4] != 0 || r >= self.modulus {
            r.overflowing_sub(&self.modulus).0
        } else {
            r
        }
    }

    pub fn square(&self, a: &U256) -> U256 {
        self.mul(a, a)
    }

    /// Montgomery form of one.
    pub fn one(&self) -> U256 {
        self.one
    }

    pub fn to_mont(&self, a: &U256) -> U256 {
        self.mul(&self.reduce(a), &self.r2)
    }

    pub fn from_mont(&self, a: &U256) -> U256 {
        self.mul(a, &U256::ONE)
    }

    /// Fully reduces an arbitrary 256-bit value modulo m.
    pub fn reduce(&self, a: &U256) -> U256 {
        if *a < self.modulus {
            return *a;
        }
        self.reduce_be_bytes(&a.to_be_bytes())
    }

    /// Interprets `bytes` as a big-endian integer of any length and reduces it.
    pub fn reduce_be_bytes(&self, bytes: &[u8]) -> U256 {
        let mut acc = U256::ZERO;
        for byte in bytes {
            for k in (0..8).rev() {
                acc = self.add(&acc, &acc);
                if (byte >> k) & 1 == 1 {
                    acc = self.add(&acc, &U256::ONE);
                }
            }
        }
        acc
    }

    /// `base^exp` for a Montgomery-form base; variable time in `exp`.
    pub fn pow(&self, base: &U256, exp: &U256) -> U256 {
        let mut acc = self.one;
        for i in (0..exp.bits()).rev() {
            acc = self.square(&acc);
            if exp.bit(i) {
                acc = self.mul(&acc, base);
            }
        }
        acc
    }

    /// Inverse of a nonzero Montgomery-form element (prime modulus assumed).
    pub fn invert(&self, a: &U256) -> Option<U256> {
        if a.is_zero() {
            return None;
        }
        let e = self.modulus.overflowing_sub(&U256::from_u64(2)).0;
        Some(self.pow(a, &e))
    }

    /// Square root of a Montgomery-form element, if it is a quadratic residue.
    /// Tonelli-Shanks in general, with the `p = 3 mod 4` shortcut.
    pub fn sqrt(&self, a: &U256) -> Option<U256> {
        if a.is_zero() {
            return Some(U256::ZERO);
        }
        let m = self.modulus;
        let m_minus_1 = m.overflowing_sub(&U256::ONE).0;
        let legendre_exp = m_minus_1.shr1();
        if self.pow(a, &legendre_exp) != self.one {
            return None;
        }
        if m.0[0] & 3 == 3 {
            let e = m.overflowing_add(&U256::ONE).0.shr1().shr1();
            let r = self.pow(a, &e);
            return (self.square(&r) == *a).then_some(r);
        }
        // m - 1 = q * 2^s with q odd
        let mut q = m_minus_1;
        let mut s = 0u32;
        while !q.is_odd() {
            q = q.shr1();
            s += 1;
        }
        let minus_one = self.neg(&self.one);
        let mut z = self.add(&self.one, &self.one);
        while self.pow(&z, &legendre_exp) != minus_one {
            z = self.add(&z, &self.one);
        }
        let mut c = self.pow(&z, &q);
        let mut x = self.pow(a, &q.overflowing_add(&U256::ONE).0.shr1());
        let mut t = self.pow(a, &q);
        let mut msb = s;
        while t != self.one {
            let mut i = 0;
            let mut t2 = t;
            while t2 != self.one {
                t2 = self.square(&t2);
                i += 1;
            }
            let mut b = c;
            for _ in 0..(msb - i - 1) {
                b = self.square(&b);
            }
            x = self.mul(&x, &b);
            c = self.square(&b);
            t = self.mul(&t, &c);
            msb = i;
        }
        Some(x)
    }
}
