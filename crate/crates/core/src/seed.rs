//! Seed derivation. Every random stream in the lab comes from a
//! `ChaCha8Rng` built here; nothing touches a global generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over `(base, stream)`; gives well-separated child
/// seeds for repetitions, data splits and mask streams.
pub fn derive(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive from a textual label so call sites read `derive_named(seed, "heldout")`.
pub fn derive_named(base: u64, label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive(base, h)
}
