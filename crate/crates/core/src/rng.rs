//! Seeded random streams forked by label.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Independent ChaCha20 stream for `label` under the run seed. Adding a new
/// label never perturbs draws made from existing ones.
pub fn stream(seed: u64, label: &str) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let digest = Sha256::digest(label.as_bytes());
    let mut id = [0u8; 8];
    id.copy_from_slice(&digest[..8]);
    rng.set_stream(u64::from_le_bytes(id));
    rng
}
