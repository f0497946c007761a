//! Deterministic, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by SHA-256 of `(seed, label)`, so any
//! worker can reconstruct the stream for a given instance without
//! coordinating with others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn split_rng(seed: u64, label: &str) -> Stream {
    let mut h = Sha256::new();
    h.update(b"gridflow/v1\0");
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// 64-bit digest of `(seed, label)`; used to derive child seeds.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    split_rng(seed, label).next_u64()
}
