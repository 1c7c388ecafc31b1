//! Radix-2 NTT over F_q and polynomial helpers on power-of-two domains.

use crate::arith::Fq;

/// The multiplicative subgroup `{w^0, ..., w^(n-1)}` of size `n = 2^log_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub size: usize,
    pub log_size: u32,
    pub omega: Fq,
    pub omega_inv: Fq,
    pub size_inv: Fq,
}

impl Domain {
    /// Smallest power-of-two domain with at least `min_size` points.
    pub fn new(min_size: usize) -> Self {
        let size = min_size.max(1).next_power_of_two();
        let log_size = size.trailing_zeros();
        let omega = Fq::root_of_unity(log_size);
        Domain {
            size,
            log_size,
            omega,
            omega_inv: omega.inverse().unwrap(),
            size_inv: Fq::new(size as u64).inverse().unwrap(),
        }
    }

    pub fn element(&self, i: usize) -> Fq {
        self.omega.pow(i as u64)
    }

    /// Coefficients -> evaluations. Input length must equal the domain size.
    pub fn fft(&self, a: &mut [Fq]) {
        ntt(a, self.omega);
    }

    /// Evaluations -> coefficients.
    pub fn ifft(&self, a: &mut [Fq]) {
        ntt(a, self.omega_inv);
        for v in a.iter_mut() {
            *v = *v * self.size_inv;
        }
    }

    /// `Z(tau) = tau^n - 1`.
    pub fn vanishing_at(&self, tau: Fq) -> Fq {
        tau.pow(self.size as u64) - Fq::ONE
    }

    /// All Lagrange basis polynomials evaluated at `tau`:
    /// `L_i(tau) = w^i (tau^n - 1) / (n (tau - w^i))`.
    pub fn lagrange_at(&self, tau: Fq) -> Vec<Fq> {
        let z = self.vanishing_at(tau);
        let mut pts = Vec::with_capacity(self.size);
        let mut w = Fq::ONE;
        for _ in 0..self.size {
            pts.push(w);
            w = w * self.omega;
        }
        if z.is_zero() {
            // tau is a domain point: the basis is an indicator vector.
            return pts.iter().map(|p| if *p == tau { Fq::ONE } else { Fq::ZERO }).collect();
        }
        let denoms: Vec<Fq> = pts.iter().map(|p| tau - *p).collect();
        let inv = batch_inverse(&denoms);
        let scale = z * self.size_inv;
        pts.iter().zip(inv).map(|(p, d)| *p * d * scale).collect()
    }
}

fn bit_reverse(a: &mut [Fq]) {
    let n = a.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
}

/// In-place iterative Cooley-Tukey transform with root `omega` of order `a.len()`.
pub fn ntt(a: &mut [Fq], omega: Fq) {
    let n = a.len();
    assert!(n.is_power_of_two(), "NTT length must be a power of two");
    bit_reverse(a);
    let mut len = 2;
    while len <= n {
        let w_len = omega.pow((n / len) as u64);
        let half = len / 2;
        let mut twiddles = Vec::with_capacity(half);
        let mut w = Fq::ONE;
        for _ in 0..half {
            twiddles.push(w);
            w = w * w_len;
        }
        for chunk in a.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for j in 0..half {
                let u = lo[j];
                let v = hi[j] * twiddles[j];
                lo[j] = u + v;
                hi[j] = u - v;
            }
        }
        len <<= 1;
    }
}

pub fn batch_inverse(v: &[Fq]) -> Vec<Fq> {
    let mut prefix = Vec::with_capacity(v.len());
    let mut acc = Fq::ONE;
    for x in v {
        prefix.push(acc);
        acc = acc * *x;
    }
    let mut inv = acc.inverse().expect("batch_inverse of a zero element");
    let mut out = vec![Fq::ZERO; v.len()];
    for i in (0..v.len()).rev() {
        out[i] = inv * prefix[i];
        inv = inv * v[i];
    }
    out
}

/// Horner evaluation.
pub fn evaluate(coeffs: &[Fq], x: Fq) -> Fq {
    coeffs.iter().rev().fold(Fq::ZERO, |acc, c| acc * x + *c)
}

/// Product of two polynomials whose degrees are below `n`, via a size-`2n` NTT.
pub fn mul_via_ntt(a: &[Fq], b: &[Fq]) -> Vec<Fq> {
    let n = (a.len() + b.len()).max(1).next_power_of_two();
    let d = Domain::new(n);
    let mut fa = a.to_vec();
    fa.resize(d.size, Fq::ZERO);
    let mut fb = b.to_vec();
    fb.resize(d.size, Fq::ZERO);
    d.fft(&mut fa);
    d.fft(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y;
    }
    d.ifft(&mut fa);
    fa
}

/// Division by `X^n - 1` of a polynomial of degree `< 2n`.
/// Returns `(quotient, remainder)`, each of length `n`.
pub fn divide_by_vanishing(p: &[Fq], n: usize) -> (Vec<Fq>, Vec<Fq>) {
    assert!(p.len() <= 2 * n);
    let at = |i: usize| p.get(i).copied().unwrap_or(Fq::ZERO);
    let quotient: Vec<Fq> = (0..n).map(|i| at(n + i)).collect();
    let remainder: Vec<Fq> = (0..n).map(|i| at(i) + at(n + i)).collect();
    (quotient, remainder)
}
