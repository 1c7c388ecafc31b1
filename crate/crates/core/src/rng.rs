//! Seed splitting. Every random draw in a run descends from one 64-bit seed:
//! the sub-seed for a labelled path is `H(seed_be || path)` and feeds a
//! ChaCha20 stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::arith::hash_concat;

pub type SimRng = ChaCha20Rng;

pub fn derive_seed(seed: u64, path: &str) -> [u8; 32] {
    hash_concat(&[&seed.to_be_bytes(), path.as_bytes()]).0
}

pub fn sub_rng(seed: u64, path: &str) -> SimRng {
    ChaCha20Rng::from_seed(derive_seed(seed, path))
}

/// A child 64-bit seed, for components that take a plain seed.
pub fn sub_seed(seed: u64, path: &str) -> u64 {
    u64::from_be_bytes(derive_seed(seed, path)[..8].try_into().unwrap())
}
