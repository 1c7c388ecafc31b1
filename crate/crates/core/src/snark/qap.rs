use super::poly::{divide_by_vanishing, mul_via_ntt, Domain};
use super::r1cs::R1CSystem;
use crate::arith::Fq;

/// Sparse column of one wire: `(constraint index, coefficient)` pairs, i.e.
/// the evaluations of the wire polynomial on the domain.
pub type Column = Vec<(usize, Fq)>;

/// QAP over a power-of-two roots-of-unity domain. Constraint `k` sits at
/// `w^k`; indices past the constraint count are trivially satisfied rows,
/// so `Z(X) = X^N - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QAPInstance {
    pub domain: Domain,
    pub num_constraints: usize,
    pub num_wires: usize,
    pub num_public: usize,
    pub a: Vec<Column>,
    pub b: Vec<Column>,
    pub c: Vec<Column>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Matrix {
    A,
    B,
    C,
}

pub fn r1cs_to_qap(sys: &R1CSystem) -> QAPInstance {
    let mut a = vec![Vec::new(); sys.num_wires];
    let mut b = vec![Vec::new(); sys.num_wires];
    let mut c = vec![Vec::new(); sys.num_wires];
    for (k, con) in sys.constraints.iter().enumerate() {
        for (w, v) in &con.a {
            a[*w].push((k, *v));
        }
        for (w, v) in &con.b {
            b[*w].push((k, *v));
        }
        for (w, v) in &con.c {
            c[*w].push((k, *v));
        }
    }
    QAPInstance {
        domain: Domain::new(sys.num_constraints()),
        num_constraints: sys.num_constraints(),
        num_wires: sys.num_wires,
        num_public: sys.num_public,
        a,
        b,
        c,
    }
}

fn column_at(col: &Column, lagrange: &[Fq]) -> Fq {
    col.iter().map(|(k, v)| lagrange[*k] * *v).sum()
}

impl QAPInstance {
    fn columns(&self, m: Matrix) -> &[Column] {
        match m {
            Matrix::A => &self.a,
            Matrix::B => &self.b,
            Matrix::C => &self.c,
        }
    }

    /// `(A_i(tau), B_i(tau), C_i(tau))` for every wire.
    pub fn evaluate_at(&self, tau: Fq) -> (Vec<Fq>, Vec<Fq>, Vec<Fq>) {
        let l = self.domain.lagrange_at(tau);
        let ev = |cols: &[Column]| cols.iter().map(|c| column_at(c, &l)).collect::<Vec<_>>();
        (ev(&self.a), ev(&self.b), ev(&self.c))
    }

    /// Coefficients of a single wire polynomial.
    pub fn wire_polynomial(&self, wire: usize, m: Matrix) -> Vec<Fq> {
        let mut e = vec![Fq::ZERO; self.domain.size];
        for (k, v) in &self.columns(m)[wire] {
            e[*k] = *v;
        }
        self.domain.ifft(&mut e);
        e
    }

    /// Coefficients of `Z(X) = X^N - 1`.
    pub fn vanishing(&self) -> Vec<Fq> {
        let mut z = vec![Fq::ZERO; self.domain.size + 1];
        z[0] = -Fq::ONE;
        z[self.domain.size] = Fq::ONE;
        z
    }

    /// Coefficients of `A(X) = sum z_i A_i(X)` and likewise for B and C.
    pub fn combined(&self, z: &[Fq]) -> (Vec<Fq>, Vec<Fq>, Vec<Fq>) {
        let n = self.domain.size;
        let comb = |cols: &[Column]| {
            let mut e = vec![Fq::ZERO; n];
            for (w, col) in cols.iter().enumerate() {
                let zw = z[w];
                if zw.is_zero() {
                    continue;
                }
                for (k, v) in col {
                    e[*k] = e[*k] + *v * zw;
                }
            }
            self.domain.ifft(&mut e);
            e
        };
        (comb(&self.a), comb(&self.b), comb(&self.c))
    }

    /// `H = (A B - C) / Z` and the remainder of that division.
    pub fn quotient(&self, z: &[Fq]) -> (Vec<Fq>, Vec<Fq>) {
        let (a, b, c) = self.combined(z);
        let mut p = mul_via_ntt(&a, &b);
        for (i, ci) in c.iter().enumerate() {
            p[i] = p[i] - *ci;
        }
        divide_by_vanishing(&p, self.domain.size)
    }
}
