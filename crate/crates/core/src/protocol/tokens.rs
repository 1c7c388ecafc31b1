//! Hash recipes for aliases, master keys, nonces and authentication tokens.
//! All inputs are domain-separated by an ASCII label.

use super::{Role, Timestamp};
use crate::arith::{hash_concat, CurvePoint, DomainParams, Scalar};
use crate::kex::{SessionKey, SharedSecret};
use crate::wire::{Alias, Point};

pub fn digest(parts: &[&[u8]]) -> [u8; 32] {
    hash_concat(parts).0
}

fn alias(parts: &[&[u8]]) -> Alias {
    hash_concat(parts).truncate16()
}

/// Server-side credential of a user, `H(PWD || ID)`.
pub fn user_credential(id: &[u8; 16], pwd: &[u8]) -> [u8; 32] {
    digest(&[b"zaps/v-u", pwd, id])
}

pub fn drone_credential(id: &[u8; 16]) -> [u8; 32] {
    digest(&[b"zaps/v-d", id])
}

/// Long-term symmetric key shared with the server: `H(x(SMK) || v)`.
pub fn master_key(role: Role, smk: &SharedSecret, credential: &[u8; 32]) -> [u8; 32] {
    let label: &[u8] = match role {
        Role::User => b"zaps/k-us",
        _ => b"zaps/k-ds",
    };
    digest(&[label, &smk.x_bytes(), credential])
}

pub fn rid(pwd: &[u8], id: &[u8; 16], p_u: &Point) -> Alias {
    alias(&[b"zaps/rid", pwd, id, p_u])
}

pub fn did(id: &[u8; 16], p_d: &Point) -> Alias {
    alias(&[b"zaps/did", id, p_d])
}

pub fn sid(id: &[u8; 16], p_s: &Point) -> Alias {
    alias(&[b"zaps/sid", id, p_s])
}

pub fn uid(rid: &Alias, sk: &SessionKey) -> Alias {
    alias(&[b"zaps/uid", rid, &sk.key])
}

/// Session nonce `r = H(label || K || salt)` and `R = r * P_s`, with the sign
/// of `r` chosen so that `R` has even y.
pub fn session_nonce(
    curve: &'static DomainParams,
    role: Role,
    k_master: &[u8; 32],
    salt: &[u8; 16],
    p_s: &CurvePoint,
) -> (Scalar, CurvePoint) {
    let label: &[u8] = match role {
        Role::User => b"zaps/r1",
        _ => b"zaps/r2",
    };
    let mut ctr = 0u8;
    loop {
        let r = Scalar::from_be_bytes_reduced(curve, &digest(&[label, k_master, salt, &[ctr]]));
        if !r.is_zero() {
            let big_r = p_s.mul(&r);
            return if big_r.has_even_y() { (r, big_r) } else { (-r, -big_r) };
        }
        ctr += 1;
    }
}

/// `x(R_1) || x(R_2) || SID || x(P_s)`.
pub fn transcript(r1: &Point, r2: &Point, sid: &Alias, p_s: &Point) -> Vec<u8> {
    [&r1[..], r2, sid, p_s].concat()
}

/// `H(label || key || fields || T)`.
pub fn mac(label: &[u8], key: &[u8], fields: &[&[u8]], t: Timestamp) -> [u8; 32] {
    let tb = t.to_be_bytes();
    let mut parts: Vec<&[u8]> = Vec::with_capacity(fields.len() + 3);
    parts.push(label);
    parts.push(key);
    parts.extend_from_slice(fields);
    parts.push(&tb);
    digest(&parts)
}

/// Key-confirmation digest: `H(label || key || fields)`.
pub fn key_confirm(label: &[u8], key: &[u8], fields: &[&[u8]]) -> [u8; 32] {
    let mut parts: Vec<&[u8]> = Vec::with_capacity(fields.len() + 2);
    parts.push(label);
    parts.push(key);
    parts.extend_from_slice(fields);
    digest(&parts)
}

/// Key used for key-confirmation digests in the init phase.
pub fn confirm_key(sk: &SessionKey) -> [u8; 32] {
    digest(&[b"zaps/kc-key", &sk.key])
}

/// MAC key for a leg in the proof phase, `H(SK || K)`.
pub fn leg_key(sk: &SessionKey, k_master: &[u8; 32]) -> [u8; 32] {
    digest(&[b"zaps/leg-key", &sk.key, k_master])
}

/// Context string fed to the prover for one party and round.
pub fn proof_context(role: Role, round: usize, sk: &SessionKey) -> [u8; 32] {
    digest(&[b"zaps/proof-ctx", &[role.code()], &(round as u32).to_be_bytes(), sk.tag.as_bytes(), &sk.key])
}

pub fn round_bytes(round: usize) -> [u8; 4] {
    (round as u32).to_be_bytes()
}
