//! Seed derivation.
//!
//! Every randomised loop draws from its own ChaCha stream keyed by
//! `(master seed, index)`, so results do not depend on how the work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed for a nested loop, e.g. restart `index` inside stage `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, index.wrapping_add(0x9e37_79b9_7f4a_7c15)).next_u64()
}
