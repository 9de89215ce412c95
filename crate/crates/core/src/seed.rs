//! Seed derivation and the RNG used everywhere in the crate.
//!
//! Every random stream is a `ChaCha20Rng` seeded with a `u64`. Sub-seeds are
//! derived from a master seed with [`derive_seed`], so that independent tasks
//! (noise realizations, excitation phases) draw from independent streams no
//! matter which thread runs them.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Name of the generator, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

/// Splitting rule recorded in run manifests.
pub const SEED_SPLITTING_RULE: &str = "splitmix64(master ^ splitmix64(stream + 1))";

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
