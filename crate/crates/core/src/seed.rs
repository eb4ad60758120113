//! Position-derived seeds.
//!
//! Every random stream in the crate is keyed by its position (run index,
//! example index, chunk index) rather than drawn from a shared generator, so
//! sequential and parallel execution produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a key path. Order matters: `derive(&[a, b]) != derive(&[b, a])`.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix(parts.len() as u64), |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parts))
}
