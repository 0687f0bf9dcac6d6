//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream keyed by (seed, stream id), so parallel trials never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// SplitMix64 finalizer; used to derive per-trial seeds.
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream ids used by the scenario runner.
pub mod ids {
    pub const TARGETS: u64 = 1;
    pub const JITTER: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const VICTIM_NOISE: u64 = 1_000;
    pub const ATTACKER_NOISE: u64 = 2_000;
}
