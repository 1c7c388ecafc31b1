//! Fiat-Shamir Schnorr proof of knowledge of `s` with `C = s*G`, where
//! `s = r + H(w || r)` is the commitment opening.
//!
//! Envelope: `x(K) || c || z || 32 zero bytes`. `K` is normalised to even y
//! so that its x-coordinate identifies it.

use rand::{CryptoRng, RngCore};

use super::pedersen::{commit, commitment_scalar, FlightPath, PedersenCommitment};
use super::{SnarkError, SnarkProof, PROOF_BYTES};
use crate::arith::{hash_concat, CurvePoint, DomainParams, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchnorrProof {
    pub k: CurvePoint,
    pub c: Scalar,
    pub z: Scalar,
}

fn point_bytes(p: &CurvePoint) -> [u8; 33] {
    let mut out = [0u8; 33];
    if let Some((x, y)) = p.coordinates() {
        out[0] = if y.is_odd() { 3 } else { 2 };
        out[1..].copy_from_slice(&x.to_be_bytes());
    }
    out
}

/// `c = H("zaps/schnorr" || K || C || context)` reduced mod n.
pub fn challenge(k: &CurvePoint, c: &CurvePoint, context: &[u8]) -> Scalar {
    let d = hash_concat(&[b"zaps/schnorr", &point_bytes(k), &point_bytes(c), context]);
    Scalar::from_be_bytes_reduced(k.curve(), d.as_bytes())
}

pub fn schnorr_prove<R: RngCore + CryptoRng>(
    commitment: &PedersenCommitment,
    path: &FlightPath,
    r: &Scalar,
    context: &[u8],
    rng: &mut R,
) -> Result<SnarkProof, SnarkError> {
    if commit(path, r)?.point != commitment.point {
        return Err(SnarkError::InconsistentOpening);
    }
    let curve = r.curve();
    let s = commitment_scalar(path, r);
    // A zero nonce or zero challenge only occurs on small test curves.
    loop {
        let mut k = Scalar::random(curve, rng);
        if k.is_zero() {
            continue;
        }
        let mut kp = CurvePoint::generator(curve).mul(&k);
        if !kp.has_even_y() {
            k = -k;
            kp = -kp;
        }
        let c = challenge(&kp, &commitment.point, context);
        if c.is_zero() {
            continue;
        }
        let z = k + c * s;
        return Ok(SchnorrProof { k: kp, c, z }.to_envelope());
    }
}

/// Accepts iff `z*G = K + c*C` and `c` is the recomputed challenge.
pub fn schnorr_verify(commitment: &CurvePoint, proof: &SnarkProof, context: &[u8]) -> bool {
    let Ok(p) = SchnorrProof::from_envelope(commitment.curve(), proof) else {
        return false;
    };
    if commitment.is_identity() {
        return false;
    }
    // z*G - c*C == K
    if CurvePoint::lincomb_vartime(&p.z, &-p.c, commitment) != p.k {
        return false;
    }
    challenge(&p.k, commitment, context) == p.c
}

/// Recovers `C = c^-1 (z*G - K)` from a proof and checks the challenge
/// against it. Returns the commitment on success.
pub fn schnorr_verify_recover(curve: &'static DomainParams, proof: &SnarkProof, context: &[u8]) -> Option<CurvePoint> {
    let p = SchnorrProof::from_envelope(curve, proof).ok()?;
    let c_inv = p.c.invert()?;
    let cm = CurvePoint::lincomb_vartime(&(p.z * c_inv), &-c_inv, &p.k);
    if cm.is_identity() || challenge(&p.k, &cm, context) != p.c {
        return None;
    }
    Some(cm)
}

impl SchnorrProof {
    pub fn to_envelope(&self) -> SnarkProof {
        let mut b = [0u8; PROOF_BYTES];
        b[..32].copy_from_slice(&self.k.to_xonly().expect("nonce point is never the identity"));
        b[32..64].copy_from_slice(&self.c.to_be_bytes());
        b[64..96].copy_from_slice(&self.z.to_be_bytes());
        SnarkProof(b)
    }

    pub fn from_envelope(curve: &'static DomainParams, env: &SnarkProof) -> Result<Self, SnarkError> {
        let b = &env.0;
        if b[96..].iter().any(|v| *v != 0) {
            return Err(SnarkError::MalformedProof);
        }
        let k = CurvePoint::from_xonly(curve, b[..32].try_into().unwrap()).map_err(|_| SnarkError::MalformedProof)?;
        let c = Scalar::from_be_bytes(curve, b[32..64].try_into().unwrap()).ok_or(SnarkError::MalformedProof)?;
        let z = Scalar::from_be_bytes(curve, b[64..96].try_into().unwrap()).ok_or(SnarkError::MalformedProof)?;
        if c.is_zero() {
            return Err(SnarkError::MalformedProof);
        }
        Ok(SchnorrProof { k, c, z })
    }

    pub fn is_envelope_shape(env: &SnarkProof) -> bool {
        env.0[96..].iter().all(|v| *v == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::secp256k1;
    use crate::rng::sub_rng;

    fn setup() -> (PedersenCommitment, FlightPath, Scalar) {
        let c = secp256k1();
        let path = FlightPath::new(vec![(10, 20); 5]).unwrap();
        let r = Scalar::random(c, &mut sub_rng(1, "r"));
        (commit(&path, &r).unwrap(), path, r)
    }

    #[test]
    fn honest_accepts_and_recovers() {
        let (cm, path, r) = setup();
        let mut rng = sub_rng(2, "k");
        let p = schnorr_prove(&cm, &path, &r, b"ctx", &mut rng).unwrap();
        assert!(schnorr_verify(&cm.point, &p, b"ctx"));
        assert_eq!(schnorr_verify_recover(secp256k1(), &p, b"ctx"), Some(cm.point));
        assert!(!schnorr_verify(&cm.point, &p, b"other"));
        assert_eq!(schnorr_verify_recover(secp256k1(), &p, b"other"), None);
    }

    #[test]
    fn contexts_change_challenge() {
        let (cm, path, r) = setup();
        let a = schnorr_prove(&cm, &path, &r, b"a", &mut sub_rng(3, "k")).unwrap();
        let b = schnorr_prove(&cm, &path, &r, b"b", &mut sub_rng(3, "k")).unwrap();
        assert_eq!(a.0[..32], b.0[..32]);
        assert_ne!(a.0[32..64], b.0[32..64]);
    }

    #[test]
    fn inconsistent_opening_and_malformed() {
        let (cm, path, r) = setup();
        let other = FlightPath::new(vec![(11, 20); 5]).unwrap();
        assert_eq!(
            schnorr_prove(&cm, &other, &r, b"", &mut sub_rng(4, "k")),
            Err(SnarkError::InconsistentOpening)
        );
        let mut p = schnorr_prove(&cm, &path, &r, b"", &mut sub_rng(4, "k")).unwrap();
        p.0[127] = 1;
        assert!(!schnorr_verify(&cm.point, &p, b""));
        let mut q = schnorr_prove(&cm, &path, &r, b"", &mut sub_rng(4, "k")).unwrap();
        q.0[95] ^= 1;
        assert!(!schnorr_verify(&cm.point, &q, b""));
    }
}
