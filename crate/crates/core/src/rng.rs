//! Seeded random number generation.
//!
//! All stochastic operations draw from [`ChaCha8Rng`], a portable and
//! reproducible stream cipher generator: the same seed yields the same
//! stream on every platform. Independent sub-streams are derived from a base
//! seed with [`derive_seed`].

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator used throughout the workspace.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of sub-stream `stream` from `base` (SplitMix64 finalizer
/// over the pair). Distinct `(base, stream)` pairs give uncorrelated seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
