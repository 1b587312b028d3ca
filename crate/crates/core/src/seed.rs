//! Deterministic seed derivation.
//!
//! Every random stream in the simulator is derived from a single root seed
//! by mixing in a stream label, so results never depend on scheduling or on
//! how many worker threads are used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `seed` and a stream label.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Derives a child seed from a sequence of labels.
pub fn derive_all(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(seed, |acc, &l| derive(acc, l))
}

/// A reproducible RNG for the given root seed and stream labels.
pub fn rng_for(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_all(seed, labels))
}
