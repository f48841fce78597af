//! Deterministic seed derivation.
//!
//! Every random decision in a run is drawn from a ChaCha8 stream whose seed
//! is derived from the master seed by mixing in a stream tag (and, where
//! needed, a round number or client id). Derivation is a pure function, so
//! any point of a run can be reproduced from `(master_seed, round)` alone —
//! this is what makes checkpoints resumable without serializing generator
//! internals.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keeping independent random decisions on independent streams.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const DISTRIBUTE: u64 = 2;
    pub const SELECT: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const CLUSTER_INIT: u64 = 5;
}

/// SplitMix64 finalizer; a well-mixed 64-bit permutation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stable 64-bit hash of `(base, a)`.
pub fn derive(base: u64, a: u64) -> u64 {
    splitmix64(base ^ splitmix64(a))
}

/// Stable 64-bit hash of `(base, a, b)`.
pub fn derive2(base: u64, a: u64, b: u64) -> u64 {
    derive(derive(base, a), b)
}

/// Seeded generator used everywhere randomness is needed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
