//! Seed derivation. Every stochastic choice in the crate draws from a
//! ChaCha8 stream keyed by a seed derived here, so runs replay bit-exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed for `(stream, index)` under `seed`.
pub fn derive(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ stream.wrapping_mul(GOLDEN)) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    rng(derive(seed, stream, index))
}

/// Named streams so unrelated consumers of one seed never share draws.
pub mod stream {
    pub const SPAWN: u64 = 1;
    pub const INIT_GRIPPER: u64 = 2;
    pub const CLOSE: u64 = 3;
    pub const LIFT: u64 = 4;
    pub const ACTION: u64 = 5;
    pub const CANDIDATES: u64 = 6;
    pub const TRIAL: u64 = 7;
    pub const SHUFFLE: u64 = 8;
    pub const INIT_WEIGHTS: u64 = 9;
    pub const EPISODE: u64 = 10;
    pub const FOLDS: u64 = 11;
    pub const LIBRARY: u64 = 12;
    pub const PROBE: u64 = 13;
}
