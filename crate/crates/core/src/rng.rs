//! Seed derivation for reproducible parallel work.
//!
//! Every random stream is a ChaCha8 generator seeded from a parent seed and a
//! stream id, so results do not depend on which worker consumes which stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for `stream` from `parent`.
pub fn split(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream ids for the top-level consumers of the master seed.
pub mod stream {
    pub const FOLDS: u64 = 1;
    pub const LEVELS: u64 = 2;
}
