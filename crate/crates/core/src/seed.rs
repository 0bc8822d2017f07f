//! Seed hierarchy.
//!
//! One master seed per run. Every dataset, and every purpose within a dataset,
//! draws its own seed by mixing the parent seed with a tag through the SplitMix64
//! finaliser. Random streams are SplitMix64 generators seeded from those values.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a purpose tag. Stable across platforms
/// and releases.
pub fn derive_seed(parent: u64, tag: &str) -> u64 {
    let mut state = mix64(parent.wrapping_add(GOLDEN_GAMMA));
    for chunk in tag.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        state = mix64(state ^ u64::from_le_bytes(word)).wrapping_add(GOLDEN_GAMMA);
    }
    mix64(state ^ tag.len() as u64)
}

/// A nonzero derived seed, for paths where zero means "unperturbed".
pub fn derive_nonzero_seed(parent: u64, tag: &str) -> u64 {
    match derive_seed(parent, tag) {
        0 => GOLDEN_GAMMA,
        s => s,
    }
}

pub type SeededRng = SplitMix64;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SplitMix64::seed_from_u64(seed)
}

/// In-place Fisher-Yates shuffle driven by the raw 64-bit stream. Uses a
/// multiply-shift bounded draw so the permutation depends only on SplitMix64.
pub fn shuffle<T>(items: &mut [T], rng: &mut SeededRng) {
    use rand::RngCore;
    for i in (1..items.len()).rev() {
        let bound = (i + 1) as u128;
        let j = ((rng.next_u64() as u128 * bound) >> 64) as usize;
        items.swap(i, j);
    }
}
