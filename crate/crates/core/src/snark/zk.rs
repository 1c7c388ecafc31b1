//! Testable stand-ins for the zero-knowledge property.

use rand::{CryptoRng, RngCore};

use super::schnorr::SchnorrProof;
use super::SnarkProof;
use crate::arith::{CurvePoint, Scalar};

/// Schnorr transcript produced without the opening: draw `(c, z)` and set
/// `K = z*G - c*C`, i.e. the challenge oracle is programmed to output `c`.
pub fn simulate_schnorr<R: RngCore + CryptoRng>(commitment: &CurvePoint, rng: &mut R) -> SnarkProof {
    let curve = commitment.curve();
    loop {
        let c = Scalar::random(curve, rng);
        let z = Scalar::random(curve, rng);
        let k = CurvePoint::lincomb_vartime(&z, &-c, commitment);
        if !k.is_identity() && k.has_even_y() {
            return SchnorrProof { k, c, z }.to_envelope();
        }
    }
}

/// True when some `window`-byte substring of `witness` appears verbatim in
/// the proof.
pub fn leaks_witness(proof: &SnarkProof, witness: &[u8], window: usize) -> bool {
    if window == 0 || witness.len() < window {
        return false;
    }
    witness
        .windows(window)
        .any(|w| proof.0.windows(window).any(|p| p == w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leak_scan() {
        let mut p = SnarkProof([0u8; 128]);
        p.0[40..44].copy_from_slice(&[1, 2, 3, 4]);
        assert!(leaks_witness(&p, &[9, 1, 2, 3, 4], 4));
        assert!(!leaks_witness(&p, &[1, 2, 3, 5], 4));
        assert!(!leaks_witness(&p, &[1, 2], 4));
    }
}
