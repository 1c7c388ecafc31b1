//! Byte-exact regression vectors under `tests/vectors`. Regenerate with
//! `cargo test -p zaps-core --test golden_vectors -- --ignored`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use zaps_core::arith::{secp256k1, Scalar};
use zaps_core::kex::{ecdh, kdf, KeyPair};
use zaps_core::protocol::*;
use zaps_core::rng::sub_rng;
use zaps_core::snark::Backend;
use zaps_core::wire::MsgKind;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/vectors")
}

fn secret(label: &str) -> Scalar {
    let h: [u8; 32] = Sha256::digest(label.as_bytes()).into();
    Scalar::from_be_bytes(secp256k1(), &h).expect("below the group order")
}

fn vectors() -> BTreeMap<String, Vec<u8>> {
    let mut v = BTreeMap::new();
    let a = KeyPair::from_secret(secret("golden/a")).unwrap();
    let b = KeyPair::from_secret(secret("golden/b")).unwrap();
    v.insert("keypair_secret".into(), a.secret().to_be_bytes().to_vec());
    v.insert("keypair_public".into(), a.public().to_xonly().unwrap().to_vec());
    let shared = ecdh(a.secret(), b.public()).unwrap();
    v.insert("ecdh_x".into(), shared.x_bytes().to_vec());
    v.insert("kdf".into(), kdf(&shared, b"golden/context").to_vec());

    for backend in [Backend::Schnorr, Backend::Qap] {
        let auth = Authority::standard(1, backend);
        let (u, d) = enroll_pair(&auth, 1, 0).unwrap();
        let route = random_route(&mut sub_rng(1, "golden/route"), &standard_fence(), 5);
        let mut run = honest_run(&auth, u, d, &route, false, sub_rng(1, "golden/run"));
        let t = run_honest_session(&mut run, 0, 20_000);
        assert!(run.outcome().is_confirmed());
        let name = backend.to_string().to_lowercase();
        v.insert(format!("{name}_session_key"), run.user.session_key().unwrap().key.to_vec());
        for (_, env) in &t.entries {
            if let Some(off) = env.kind.proof_offset().filter(|_| env.kind == MsgKind::Msg5) {
                v.insert(format!("{name}_proof"), env.bytes[off..off + 128].to_vec());
            }
            v.insert(format!("{name}_{}", env.kind.to_string().to_lowercase()), env.bytes.clone());
        }
    }
    v
}

#[test]
fn golden_vectors_match() {
    let v = vectors();
    assert_eq!(v.len(), 4 + 2 * (1 + 1 + 8));
    for (name, bytes) in &v {
        let path = dir().join(format!("{name}.hex"));
        let stored = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(stored.trim(), hex::encode(bytes), "{name}");
    }
}

// The kdf vector is also checked against a direct SHA-256 of its inputs.
#[test]
fn kdf_vector_matches_sha256() {
    let v = vectors();
    let mut h = Sha256::new();
    h.update(&v["ecdh_x"]);
    h.update(b"golden/context");
    assert_eq!(h.finalize().to_vec(), v["kdf"]);
}

#[test]
#[ignore]
fn regenerate_golden_vectors() {
    std::fs::create_dir_all(dir()).unwrap();
    for (name, bytes) in vectors() {
        std::fs::write(dir().join(format!("{name}.hex")), hex::encode(bytes) + "\n").unwrap();
    }
}

/// Affine double-and-add over BigUint, independent of the crate's field code.
fn oracle_mul(k: &[u8]) -> Vec<u8> {
    use num_bigint::BigUint;
    let p = BigUint::parse_bytes(b"fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f", 16).unwrap();
    let gx = BigUint::parse_bytes(b"79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798", 16).unwrap();
    let gy = BigUint::parse_bytes(b"483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8", 16).unwrap();
    let inv = |a: &BigUint| a.modpow(&(&p - 2u32), &p);
    let sub = |a: &BigUint, b: &BigUint| (a + &p - b) % &p;
    let add = |a: &Option<(BigUint, BigUint)>, b: &Option<(BigUint, BigUint)>| -> Option<(BigUint, BigUint)> {
        let (Some((x1, y1)), Some((x2, y2))) = (a, b) else {
            return a.clone().or(b.clone());
        };
        let l = if x1 == x2 {
            if (y1 + y2) % &p == BigUint::ZERO {
                return None;
            }
            (3u32 * x1 * x1) % &p * inv(&(2u32 * y1 % &p)) % &p
        } else {
            sub(y2, y1) * inv(&sub(x2, x1)) % &p
        };
        let x3 = sub(&sub(&(&l * &l % &p), x1), x2);
        let y3 = sub(&(&l * sub(x1, &x3) % &p), y1);
        Some((x3, y3))
    };
    let mut acc = None;
    let g = Some((gx, gy));
    for byte in k {
        for bit in (0..8).rev() {
            acc = add(&acc, &acc);
            if byte >> bit & 1 == 1 {
                acc = add(&acc, &g);
            }
        }
    }
    let x = acc.unwrap().0.to_bytes_be();
    let mut out = vec![0u8; 32 - x.len()];
    out.extend(x);
    out
}

#[test]
fn keypair_and_ecdh_vectors_match_oracle() {
    let v = vectors();
    assert_eq!(oracle_mul(&v["keypair_secret"]), v["keypair_public"]);
    // x(a * B) where B = b * G equals x((a*b mod n) * G).
    let n = num_bigint::BigUint::parse_bytes(b"fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141", 16).unwrap();
    let a = num_bigint::BigUint::from_bytes_be(&secret("golden/a").to_be_bytes());
    let b = num_bigint::BigUint::from_bytes_be(&secret("golden/b").to_be_bytes());
    let ab = (a * b % n).to_bytes_be();
    assert_eq!(oracle_mul(&ab), v["ecdh_x"]);
}
