//! Random stream derivation.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] whose
//! seed is derived from a single user seed and a path of integer tags, e.g.
//! `(seed, [PURPOSE_FIT, transition_id, chain])`. Tags are folded in order
//! with SplitMix64, so distinct paths give statistically independent streams
//! and the same path always reproduces the same stream, whatever thread
//! evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const PURPOSE_SIMULATE: u64 = 1;
pub const PURPOSE_FIT: u64 = 2;
pub const PURPOSE_GCOMP: u64 = 3;
pub const PURPOSE_REPLICATE: u64 = 4;
pub const PURPOSE_CENSOR_PILOT: u64 = 5;
pub const PURPOSE_ORACLE: u64 = 6;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `tags` into `seed`.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, tags))
}

/// Seed of replicate `r` of a study: `base_seed ⊕ r`, then mixed.
pub fn replicate_seed(base_seed: u64, replicate: u64) -> u64 {
    splitmix64(base_seed ^ replicate)
}
