//! QAP proof system over the pedagogical pairing group.
//!
//! Verification evaluates `e(VK + piA, piB) = e(piH, vk_z) * e(piC, h)` with
//! `VK = rhoA (A_0(tau) + sum s_i A_i(tau))`. [`gen_proof`] is deterministic;
//! [`gen_proof_blinded`], which the protocol uses, adds random multiples of
//! `Z` to A, B and C. The group exposes exponents, so neither is
//! zero-knowledge in any cryptographic sense.
//!
//! Only the A-side of public inputs enters `VK`. Circuits that use a public
//! wire in B or C are rewritten at setup: each such wire gets a private copy
//! tied to it by `(s_i - copy) * 1 = 0`.

use rand::{CryptoRng, RngCore};

use super::qap::{r1cs_to_qap, QAPInstance};
use super::r1cs::{Constraint, LinComb, R1CSystem};
use super::{SnarkError, SnarkProof, Statement, PROOF_BYTES};
use crate::arith::{pair, Fq, GroupTag, PairGroupElem};

pub const PK_MAGIC: &[u8; 7] = b"ZAPSPK1";
pub const VK_MAGIC: &[u8; 7] = b"ZAPSVK1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvingKey {
    pub security: u32,
    /// The circuit as given to setup.
    pub system: R1CSystem,
    /// `(public wire, private copy)` pairs added by [`bind_public_inputs`].
    pub copies: Vec<(usize, usize)>,
    pub qap: QAPInstance,
    /// `rhoA A_i(tau)` in G1.
    pub a_g1: Vec<Fq>,
    /// `rhoB B_i(tau)` in G2.
    pub b_g2: Vec<Fq>,
    /// `rhoA rhoB C_i(tau)` in G1.
    pub c_g1: Vec<Fq>,
    /// `tau^j` in G1 for the quotient polynomial.
    pub h_g1: Vec<Fq>,
    /// `Z(tau)` scaled by `rhoA` (G1), `rhoB` (G2), `rhoA rhoB` (G1) and 1
    /// (G1), for blinding.
    pub z_blind: [Fq; 4],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationKey {
    pub security: u32,
    /// `rhoA A_i(tau)` for the constant wire and every public input.
    pub ic: Vec<PairGroupElem>,
    /// `rhoA rhoB Z(tau)` in G2.
    pub vk_z: PairGroupElem,
    /// G2 generator.
    pub h: PairGroupElem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QapProof {
    pub pi_a: PairGroupElem,
    pub pi_b: PairGroupElem,
    pub pi_c: PairGroupElem,
    pub pi_h: PairGroupElem,
}

fn nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Fq {
    loop {
        let v = Fq::random(rng);
        if !v.is_zero() {
            return v;
        }
    }
}

/// Moves every use of a public wire in B or C onto a private copy.
pub fn bind_public_inputs(sys: &R1CSystem) -> (R1CSystem, Vec<(usize, usize)>) {
    let np = sys.num_public;
    let is_pub = |w: usize| (1..=np).contains(&w);
    let mut used: Vec<usize> = sys
        .constraints
        .iter()
        .flat_map(|c| c.b.iter().chain(&c.c).map(|(w, _)| *w))
        .filter(|w| is_pub(*w))
        .collect();
    used.sort_unstable();
    used.dedup();
    if used.is_empty() {
        return (sys.clone(), Vec::new());
    }
    let mut out = sys.clone();
    let copies: Vec<(usize, usize)> = used.iter().map(|p| (*p, out.alloc())).collect();
    let remap = |lc: &mut LinComb| {
        for (w, _) in lc.iter_mut() {
            if let Some((_, c)) = copies.iter().find(|(p, _)| p == w) {
                *w = *c;
            }
        }
    };
    for con in out.constraints.iter_mut() {
        remap(&mut con.b);
        remap(&mut con.c);
    }
    for (p, c) in &copies {
        out.enforce(vec![(*p, Fq::ONE), (*c, -Fq::ONE)], vec![(0, Fq::ONE)], vec![]);
    }
    (out, copies)
}

pub fn snark_setup<R: RngCore + CryptoRng>(
    security: u32,
    circuit: &R1CSystem,
    rng: &mut R,
) -> Result<(ProvingKey, VerificationKey), SnarkError> {
    if circuit.num_constraints() == 0 {
        return Err(SnarkError::DegenerateCircuit);
    }
    let (bound, copies) = bind_public_inputs(circuit);
    let qap = r1cs_to_qap(&bound);
    let tau = loop {
        let t = nonzero(rng);
        if !qap.domain.vanishing_at(t).is_zero() {
            break t;
        }
    };
    let rho_a = nonzero(rng);
    let rho_b = nonzero(rng);
    let rho_ab = rho_a * rho_b;
    let (at, bt, ct) = qap.evaluate_at(tau);
    let a_g1: Vec<Fq> = at.iter().map(|v| *v * rho_a).collect();
    let b_g2: Vec<Fq> = bt.iter().map(|v| *v * rho_b).collect();
    let c_g1: Vec<Fq> = ct.iter().map(|v| *v * rho_ab).collect();
    let mut h_g1 = Vec::with_capacity(qap.domain.size);
    let mut p = Fq::ONE;
    for _ in 0..qap.domain.size {
        h_g1.push(p);
        p = p * tau;
    }
    let z_tau = qap.domain.vanishing_at(tau);
    let z_blind = [z_tau * rho_a, z_tau * rho_b, z_tau * rho_ab, z_tau];
    let vk = VerificationKey {
        security,
        ic: a_g1[..=circuit.num_public].iter().map(|v| PairGroupElem::G1(*v)).collect(),
        vk_z: PairGroupElem::G2(qap.domain.vanishing_at(tau) * rho_ab),
        h: PairGroupElem::generator(GroupTag::G2),
    };
    let pk = ProvingKey {
        security,
        system: circuit.clone(),
        copies,
        qap,
        a_g1,
        b_g2,
        c_g1,
        h_g1,
        z_blind,
    };
    Ok((pk, vk))
}

fn check_statement(pk: &ProvingKey, x: &Statement, w: &[Fq]) -> Result<(), SnarkError> {
    let np = pk.system.num_public;
    if x.public_inputs.len() != np || w.len() != pk.system.num_wires || w[1..=np] != x.public_inputs[..] {
        return Err(SnarkError::StatementMismatch);
    }
    Ok(())
}

/// Proves after checking that `w` satisfies the circuit against `x`.
pub fn gen_proof(pk: &ProvingKey, x: &Statement, w: &[Fq]) -> Result<QapProof, SnarkError> {
    check_statement(pk, x, w)?;
    if let Some(k) = pk.system.first_unsatisfied(w) {
        return Err(SnarkError::WitnessInvalid { constraint: k });
    }
    Ok(prove_unchecked(pk, w))
}

fn extend_witness(pk: &ProvingKey, w: &[Fq]) -> Vec<Fq> {
    let mut z = w.to_vec();
    z.extend(pk.copies.iter().map(|(p, _)| w[*p]));
    z
}

/// Runs the prover arithmetic without the satisfaction check. Exists so that
/// soundness tests can feed wrong witnesses; the quotient then drops the
/// non-zero remainder.
pub fn prove_unchecked(pk: &ProvingKey, w: &[Fq]) -> QapProof {
    let np = pk.system.num_public;
    let w = &extend_witness(pk, w);
    let dot = |k: &[Fq], from: usize| -> Fq { k[from..].iter().zip(&w[from..]).map(|(a, b)| *a * *b).sum() };
    let (h, _remainder) = pk.qap.quotient(w);
    let pi_h: Fq = h.iter().zip(&pk.h_g1).map(|(a, b)| *a * *b).sum();
    QapProof {
        pi_a: PairGroupElem::G1(dot(&pk.a_g1, np + 1)),
        pi_b: PairGroupElem::G2(dot(&pk.b_g2, 0)),
        pi_c: PairGroupElem::G1(dot(&pk.c_g1, 0)),
        pi_h: PairGroupElem::G1(pi_h),
    }
}

/// Proof randomised with `delta_1..3`: A, B and C each gain a multiple of
/// `Z` and the quotient absorbs the cross terms.
pub fn gen_proof_blinded<R: RngCore + CryptoRng>(
    pk: &ProvingKey,
    x: &Statement,
    w: &[Fq],
    rng: &mut R,
) -> Result<QapProof, SnarkError> {
    check_statement(pk, x, w)?;
    if let Some(k) = pk.system.first_unsatisfied(w) {
        return Err(SnarkError::WitnessInvalid { constraint: k });
    }
    let (d1, d2, d3) = (Fq::random(rng), Fq::random(rng), Fq::random(rng));
    let base = prove_unchecked(pk, w);
    let z = extend_witness(pk, w);
    let (a, b, _) = pk.qap.combined(&z);
    let at = |p: &[Fq]| -> Fq { p.iter().zip(&pk.h_g1).map(|(u, v)| *u * *v).sum() };
    let [za, zb, zab, zt] = pk.z_blind;
    let g1 = |e: PairGroupElem| e.exponent().expect("G1/G2 element");
    Ok(QapProof {
        pi_a: PairGroupElem::G1(g1(base.pi_a) + d1 * za),
        pi_b: PairGroupElem::G2(g1(base.pi_b) + d2 * zb),
        pi_c: PairGroupElem::G1(g1(base.pi_c) + d3 * zab),
        pi_h: PairGroupElem::G1(g1(base.pi_h) + d2 * at(&a) + d1 * at(&b) + d1 * d2 * zt - d3),
    })
}

/// The aggregate `VK = ic_0 + sum s_i ic_i`.
pub fn aggregate_vk(vk: &VerificationKey, x: &Statement) -> Option<PairGroupElem> {
    if x.public_inputs.len() + 1 != vk.ic.len() {
        return None;
    }
    let mut acc = vk.ic[0];
    for (s, ic) in x.public_inputs.iter().zip(&vk.ic[1..]) {
        acc = acc.combine(&ic.scale(*s)).ok()?;
    }
    Some(acc)
}

fn tags_ok(p: &QapProof) -> bool {
    p.pi_a.tag() == GroupTag::G1
        && p.pi_b.tag() == GroupTag::G2
        && p.pi_c.tag() == GroupTag::G1
        && p.pi_h.tag() == GroupTag::G1
}

pub fn ver_proof(vk: &VerificationKey, x: &Statement, proof: &QapProof) -> bool {
    if !tags_ok(proof) {
        return false;
    }
    let Some(vk_x) = aggregate_vk(vk, x) else {
        return false;
    };
    let eval = || -> Result<bool, crate::arith::ArithError> {
        let lhs = pair(&vk_x.combine(&proof.pi_a)?, &proof.pi_b)?;
        let rhs = pair(&proof.pi_h, &vk.vk_z)?.combine(&pair(&proof.pi_c, &vk.h)?)?;
        Ok(lhs == rhs)
    };
    eval().unwrap_or(false)
}

/// Both sides of the pairing identity as GT exponents, computed with field
/// arithmetic only.
pub fn pairing_sides_exponent(vk: &VerificationKey, x: &Statement, proof: &QapProof) -> Option<(Fq, Fq)> {
    let v = aggregate_vk(vk, x)?.exponent()?;
    let (a, b, c, h) = (
        proof.pi_a.exponent()?,
        proof.pi_b.exponent()?,
        proof.pi_c.exponent()?,
        proof.pi_h.exponent()?,
    );
    let lhs = (v + a) * b;
    let rhs = h * vk.vk_z.exponent()? + c * vk.h.exponent()?;
    Some((lhs, rhs))
}

impl QapProof {
    /// Four 32-byte slots, each 24 zero bytes followed by the 8-byte exponent.
    pub fn to_envelope(&self) -> SnarkProof {
        let mut bytes = [0u8; PROOF_BYTES];
        for (i, e) in [self.pi_a, self.pi_b, self.pi_c, self.pi_h].iter().enumerate() {
            let v = e.exponent().expect("G1/G2 element").value();
            bytes[32 * i + 24..32 * (i + 1)].copy_from_slice(&v.to_be_bytes());
        }
        SnarkProof(bytes)
    }

    pub fn from_envelope(env: &SnarkProof) -> Result<Self, SnarkError> {
        let mut v = [Fq::ZERO; 4];
        for (i, slot) in env.0.chunks(32).enumerate() {
            if slot[..24].iter().any(|b| *b != 0) {
                return Err(SnarkError::MalformedProof);
            }
            let raw = u64::from_be_bytes(slot[24..].try_into().unwrap());
            v[i] = Fq::from_canonical(raw).ok_or(SnarkError::MalformedProof)?;
        }
        Ok(QapProof {
            pi_a: PairGroupElem::G1(v[0]),
            pi_b: PairGroupElem::G2(v[1]),
            pi_c: PairGroupElem::G1(v[2]),
            pi_h: PairGroupElem::G1(v[3]),
        })
    }

    pub fn is_envelope_shape(env: &SnarkProof) -> bool {
        Self::from_envelope(env).is_ok()
    }
}

// ---------------------------------------------------------------------------
// Key files

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_be_bytes());
    }
    fn fq(&mut self, v: Fq) {
        self.0.extend_from_slice(&v.value().to_be_bytes());
    }
    fn fqs(&mut self, v: &[Fq]) {
        self.u32(v.len());
        for x in v {
            self.fq(*x);
        }
    }
    fn lc(&mut self, lc: &LinComb) {
        self.u32(lc.len());
        for (w, k) in lc {
            self.u32(*w);
            self.fq(*k);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnarkError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| SnarkError::KeyFile("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize, SnarkError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn fq(&mut self) -> Result<Fq, SnarkError> {
        let v = u64::from_be_bytes(self.take(8)?.try_into().unwrap());
        Fq::from_canonical(v).ok_or_else(|| SnarkError::KeyFile("non-canonical field element".into()))
    }
    fn fqs(&mut self) -> Result<Vec<Fq>, SnarkError> {
        let n = self.u32()?;
        if n > self.buf.len() {
            return Err(SnarkError::KeyFile("length out of range".into()));
        }
        (0..n).map(|_| self.fq()).collect()
    }
    fn lc(&mut self, wires: usize) -> Result<LinComb, SnarkError> {
        let n = self.u32()?;
        let mut out = Vec::new();
        for _ in 0..n {
            let w = self.u32()?;
            if w >= wires {
                return Err(SnarkError::KeyFile("wire index out of range".into()));
            }
            out.push((w, self.fq()?));
        }
        Ok(out)
    }
    fn magic(&mut self, m: &[u8; 7]) -> Result<(), SnarkError> {
        if self.take(7)? != m {
            return Err(SnarkError::KeyFile("bad magic".into()));
        }
        Ok(())
    }
    fn finish(&self) -> Result<(), SnarkError> {
        if self.pos != self.buf.len() {
            return Err(SnarkError::KeyFile("trailing bytes".into()));
        }
        Ok(())
    }
}

impl ProvingKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(PK_MAGIC.to_vec());
        w.u32(self.security as usize);
        w.u32(self.system.num_wires);
        w.u32(self.system.num_public);
        w.u32(self.system.constraints.len());
        for c in &self.system.constraints {
            w.lc(&c.a);
            w.lc(&c.b);
            w.lc(&c.c);
        }
        w.fqs(&self.a_g1);
        w.fqs(&self.b_g2);
        w.fqs(&self.c_g1);
        w.fqs(&self.h_g1);
        for v in self.z_blind {
            w.fq(v);
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, SnarkError> {
        let mut r = Reader { buf, pos: 0 };
        r.magic(PK_MAGIC)?;
        let security = r.u32()? as u32;
        let num_wires = r.u32()?;
        let num_public = r.u32()?;
        let m = r.u32()?;
        if num_public >= num_wires || m > buf.len() {
            return Err(SnarkError::KeyFile("inconsistent header".into()));
        }
        let mut system = R1CSystem {
            constraints: Vec::with_capacity(m),
            num_wires,
            num_public,
        };
        for _ in 0..m {
            let a = r.lc(num_wires)?;
            let b = r.lc(num_wires)?;
            let c = r.lc(num_wires)?;
            system.constraints.push(Constraint { a, b, c });
        }
        let (a_g1, b_g2, c_g1, h_g1) = (r.fqs()?, r.fqs()?, r.fqs()?, r.fqs()?);
        let z_blind = [r.fq()?, r.fq()?, r.fq()?, r.fq()?];
        r.finish()?;
        let (bound, copies) = bind_public_inputs(&system);
        let qap = r1cs_to_qap(&bound);
        if [a_g1.len(), b_g2.len(), c_g1.len()] != [bound.num_wires; 3] || h_g1.len() != qap.domain.size {
            return Err(SnarkError::KeyFile("vector length mismatch".into()));
        }
        Ok(ProvingKey {
            security,
            system,
            copies,
            qap,
            a_g1,
            b_g2,
            c_g1,
            h_g1,
            z_blind,
        })
    }
}

impl VerificationKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(VK_MAGIC.to_vec());
        w.u32(self.security as usize);
        let ic: Vec<Fq> = self.ic.iter().map(|e| e.exponent().expect("G1")).collect();
        w.fqs(&ic);
        w.fq(self.vk_z.exponent().expect("G2"));
        w.fq(self.h.exponent().expect("G2"));
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, SnarkError> {
        let mut r = Reader { buf, pos: 0 };
        r.magic(VK_MAGIC)?;
        let security = r.u32()? as u32;
        let ic = r.fqs()?.into_iter().map(PairGroupElem::G1).collect::<Vec<_>>();
        if ic.is_empty() {
            return Err(SnarkError::KeyFile("empty input commitments".into()));
        }
        let vk_z = PairGroupElem::G2(r.fq()?);
        let h = PairGroupElem::G2(r.fq()?);
        r.finish()?;
        Ok(VerificationKey { security, ic, vk_z, h })
    }
}
