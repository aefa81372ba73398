//! Seed derivation.
//!
//! Every stochastic step draws from a ChaCha8 stream whose seed is derived
//! from one top-level `u64` plus a path of indices (component tag, trace
//! index, generation, repetition...). Streams therefore never depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `seed`. Distinct paths give unrelated seeds.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(seed: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Component tags used by campaigns when splitting the top-level seed.
pub mod stream {
    pub const SIM_PROFILING: u64 = 1;
    pub const SIM_VALIDATION: u64 = 2;
    pub const SIM_ATTACK: u64 = 3;
    pub const GUESSING_ENTROPY: u64 = 4;
    pub const UMDA: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const FITNESS: u64 = 7;
}
