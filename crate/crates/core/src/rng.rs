//! Deterministic randomness.
//!
//! Every random draw is addressed by `(seed, counter)`: the seed selects a
//! ChaCha key and the counter selects an independent stream. Draw `i` of a
//! Monte Carlo run or sample `i` of a sensor is therefore reproducible in
//! isolation, independent of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Mixes an entity identifier into a global seed. Adding an entity never
/// changes the seed of another one.
pub fn derive_seed(global: u64, entity: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer over (global ^ hash).
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in entity.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(global ^ h.rotate_left(17))
}

/// Derives a sub-seed for a named purpose of an entity (e.g. "noise", "clock").
pub fn derive_subseed(seed: u64, purpose: &str) -> u64 {
    derive_seed(seed, purpose)
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the `counter`-th independent stream under `seed`.
pub fn keyed_rng(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

/// One standard normal variate addressed by `(seed, counter)`.
pub fn keyed_standard_normal(seed: u64, counter: u64) -> f64 {
    StandardNormal.sample(&mut keyed_rng(seed, counter))
}
