//! Field, curve, hash and pairing-group arithmetic.

pub mod curve;
pub mod hash;
pub mod pairing;
pub mod u256;

use thiserror::Error;

pub use curve::{point_add, scalar_mul, secp256k1, toy_curve, CurvePoint, DomainParams, Scalar};
pub use hash::{hash, hash_concat, Digest32};
pub use pairing::{pair, pairing_exponent, Fq, GroupTag, GtElem, PairGroupElem};
pub use u256::U256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("point does not satisfy the curve equation")]
    OffCurve,
    #[error("invalid point encoding")]
    InvalidEncoding,
    #[error("the identity has no x-only encoding")]
    IdentityEncoding,
    #[error("pairing arguments must be (G1, G2) elements")]
    PairingDomain,
}
