//! Seed derivation.
//!
//! Every randomised operation takes an explicit `u64` seed and builds its own
//! [`ChaCha8Rng`]. Child seeds are derived with a counter-based SplitMix64
//! mix: `derive_seed(parent, stream)` is a pure function, so a repetition or
//! query can compute its seed from `(master, index)` without touching any
//! shared generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child stream `stream` from `parent`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    mix64(parent.wrapping_add(GOLDEN_GAMMA.wrapping_mul(stream.wrapping_add(1))))
}

/// Derives a seed along a path of stream indices, e.g. `[fraction, repetition]`.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |seed, &s| derive_seed(seed, s))
}

/// Stable 64-bit label hash (FNV-1a), used to name streams by string.
pub fn label_stream(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
