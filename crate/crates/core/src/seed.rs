//! Seed derivation.
//!
//! Every random draw in the crate is keyed by a `u64` seed. Composite seeds
//! (grid cell, trial, restart, ...) are folded through SplitMix64 so that
//! results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed together with a path of indices into a new seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fixed sub-stream tags so different quantities of one trial never share a stream.
pub(crate) mod stream {
    pub const OPERATOR: u64 = 1;
    pub const SIGNAL: u64 = 2;
    pub const MATRIX: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const POOL: u64 = 5;
    pub const PILOT: u64 = 6;
}
