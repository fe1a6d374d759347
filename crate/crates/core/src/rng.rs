//! Seed plumbing.
//!
//! All randomness flows through [`ChaCha8Rng`], a counter-based generator whose
//! output for a given 64-bit seed is identical on every platform. Independent
//! streams (placement, fading, agent noise, per-episode resets, ...) are keyed
//! off one user seed with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream identifiers used with [`derive_seed`].
pub mod stream {
    pub const PLACEMENT: u64 = 1;
    pub const FADING: u64 = 2;
    pub const EPISODE: u64 = 3;
    pub const AGENT: u64 = 4;
    pub const INIT: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const SEARCH: u64 = 7;
    pub const RANDOM_POLICY: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `(base, stream, index)` into a new seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream.rotate_left(17)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
