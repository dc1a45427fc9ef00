//! Seed derivation.
//!
//! Every random draw in a run descends from one master seed. A component
//! asks for its own stream with a name and an index; the sub-seed is the
//! first eight bytes (little endian) of
//! `SHA-256(master_le64 || name_utf8 || 0x00 || index_le64)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent sub-seed for `component` number `index`.
pub fn derive_seed(master: u64, component: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(component.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

/// The generator used for every stochastic operation in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
