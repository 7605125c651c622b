//! Stable 64-bit seed derivation.
//!
//! Streams are derived from a tuple of integers with the SplitMix64
//! finalizer (multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB,
//! increment 0x9E3779B97F4A7C15), so any implementation can reproduce them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// h₀ = 0; hᵢ₊₁ = mix64(hᵢ ⊕ (partᵢ + (i+1)·γ)).
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().enumerate().fold(0u64, |h, (i, &p)| {
        mix64(h ^ p.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN_GAMMA)))
    })
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Stream tags used by the evolutionary loop.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const MUTATE: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const REPETITION: u64 = 4;
}
