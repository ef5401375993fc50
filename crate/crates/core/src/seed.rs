use sha2::{Digest, Sha256};

/// Stable sub-seed for one purpose of a run: the first eight bytes of
/// SHA-256 over the little-endian run seed followed by `label`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
