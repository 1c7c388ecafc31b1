//! ECDH key agreement and the three-party session key.
//!
//! Ephemerals are blinded by the server public key, `R_i = r_i * P_s`, and
//! relayed by the server. The user computes `r1 * R_2`, the drone
//! `r2 * R_1`; both equal `r1 * r2 * V_s * G`.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::arith::{hash_concat, CurvePoint, Digest32, DomainParams, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KexError {
    #[error("peer key is the identity, off the curve or on another curve")]
    InvalidPeerKey,
    #[error("derived key point is the identity")]
    DegenerateKey,
    #[error("secret scalar is zero")]
    ZeroSecret,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct KeyPair {
    secret: Scalar,
    public: CurvePoint,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_secret(secret: Scalar) -> Result<Self, KexError> {
        if secret.is_zero() {
            return Err(KexError::ZeroSecret);
        }
        let public = CurvePoint::generator(secret.curve()).mul(&secret);
        Ok(KeyPair { secret, public })
    }

    pub fn secret(&self) -> &Scalar {
        &self.secret
    }

    pub fn public(&self) -> &CurvePoint {
        &self.public
    }
}

/// Fresh key pair. The secret is negated when needed so that the public key
/// has even y and survives the x-only wire encoding unchanged.
pub fn gen_keypair<R: RngCore + CryptoRng>(curve: &'static DomainParams, rng: &mut R) -> KeyPair {
    let s = Scalar::random(curve, rng);
    let p = CurvePoint::generator(curve).mul(&s);
    if p.has_even_y() {
        KeyPair { secret: s, public: p }
    } else {
        KeyPair { secret: -s, public: -p }
    }
}

/// A non-identity ECDH output point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedSecret {
    point: CurvePoint,
}

impl SharedSecret {
    pub fn point(&self) -> &CurvePoint {
        &self.point
    }

    pub fn x_bytes(&self) -> [u8; 32] {
        self.point.to_xonly().expect("shared secret is never the identity")
    }
}

fn check_peer(curve: &'static DomainParams, pk: &CurvePoint) -> Result<(), KexError> {
    if pk.curve() != curve || pk.is_identity() || !pk.is_on_curve() {
        return Err(KexError::InvalidPeerKey);
    }
    Ok(())
}

pub fn ecdh(sk: &Scalar, pk: &CurvePoint) -> Result<SharedSecret, KexError> {
    check_peer(sk.curve(), pk)?;
    let point = pk.mul(sk);
    if point.is_identity() {
        return Err(KexError::DegenerateKey);
    }
    Ok(SharedSecret { point })
}

/// `H(x || context)`.
pub fn kdf(secret: &SharedSecret, context: &[u8]) -> [u8; 32] {
    hash_concat(&[&secret.x_bytes(), context]).0
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SessionKey {
    pub key: [u8; 32],
    pub tag: Digest32,
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKey").field("tag", &self.tag).finish_non_exhaustive()
    }
}

/// Session key from `own_nonce * peer_ephemeral`, bound to `transcript`.
/// Also returns the shared point for point-level comparisons.
pub fn derive_session_key_with_point(
    own_nonce: &Scalar,
    peer_ephemeral: &CurvePoint,
    transcript: &[u8],
) -> Result<(SessionKey, SharedSecret), KexError> {
    if peer_ephemeral.is_identity() {
        return Err(KexError::DegenerateKey);
    }
    let shared = ecdh(own_nonce, peer_ephemeral)?;
    let key = kdf(&shared, transcript);
    let tag = hash_concat(&[b"zaps/transcript", transcript]);
    Ok((SessionKey { key, tag }, shared))
}

pub fn derive_session_key(
    own_nonce: &Scalar,
    peer_ephemeral: &CurvePoint,
    transcript: &[u8],
) -> Result<SessionKey, KexError> {
    derive_session_key_with_point(own_nonce, peer_ephemeral, transcript).map(|(k, _)| k)
}
