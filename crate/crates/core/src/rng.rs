//! Stable seed derivation.
//!
//! Seeds are combined with SplitMix64 so derived streams never depend on the
//! standard library's hasher, which is free to change between releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PlanRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a sequence of words into one seed. Order matters.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_0F_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a over UTF-8 bytes; used to turn labels into seed words.
pub fn label_word(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn rng_from(parts: &[u64]) -> PlanRng {
    ChaCha8Rng::seed_from_u64(mix_seed(parts))
}
