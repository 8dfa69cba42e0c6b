//! Labeled sub-seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from the run seed
//! plus a label and an index, so adding a new stream never shifts existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a 64-bit sub-seed from `(seed, label, index)` via SHA-256.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        assert_eq!(derive_seed(7, "a", 0), derive_seed(7, "a", 0));
        assert_ne!(derive_seed(7, "a", 0), derive_seed(7, "b", 0));
        assert_ne!(derive_seed(7, "a", 0), derive_seed(7, "a", 1));
        assert_ne!(derive_seed(7, "a", 0), derive_seed(8, "a", 0));
        // "ab"+idx must not collide with "a"+other framing
        assert_ne!(derive_seed(1, "ab", 0), derive_seed(1, "a", 0));
    }
}
