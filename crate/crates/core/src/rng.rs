//! Seeded randomness.
//!
//! Every stochastic operation takes an explicit `u64` seed and builds a
//! [`ChaCha8Rng`] from it. ChaCha8 output is specified independently of
//! platform and word size, so a seed reproduces the same stream everywhere.
//! Child seeds for trials, folds and restarts are derived with a SplitMix64
//! step so that parallel work never shares a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of stream labels.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}
