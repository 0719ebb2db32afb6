//! Seed derivation. Every random stream is ChaCha8 keyed by
//! `SHA-256(seed_le ‖ label)`, so a stream is reproducible from the
//! top-level seed and its purpose label alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn stream_key(seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(seed, label))
}

/// A derived 64-bit seed, for handing a sub-task its own top-level seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let key = stream_key(seed, label);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}
