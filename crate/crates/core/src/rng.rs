//! Deterministic RNG stream derivation.
//!
//! Every randomized component draws from its own ChaCha stream derived from
//! the master seed, a purpose tag, and an index (relation id, training step,
//! ...). Streams are independent of thread scheduling, so runs are
//! reproducible at any parallelism level.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PURPOSE_EMBEDDING: u64 = 1;
pub const PURPOSE_NEGATIVES: u64 = 2;
pub const PURPOSE_EVAL: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives an independent stream for (seed, purpose, index).
pub fn derive(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ splitmix64(purpose)) ^ splitmix64(index));
    ChaCha8Rng::seed_from_u64(mixed)
}
