use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic per-path seed from `(master, n_index, replicate, path)`.
///
/// SHA-256 over the little-endian encoding of all four inputs, truncated to
/// 64 bits. Each path seeds its own ChaCha stream, so results do not depend
/// on the order paths are generated in.
pub fn derive_seed(master: u64, n_index: u64, replicate: u64, path: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"tailgrid/seed/v1");
    hasher.update(master.to_le_bytes());
    hasher.update(n_index.to_le_bytes());
    hasher.update(replicate.to_le_bytes());
    hasher.update(path.to_le_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
