//! Seed expansion.
//!
//! A run is driven by one 64-bit seed. Each stage draws from its own stream,
//! seeded by `derive(run_seed, stage_name)`: the stage name is hashed with
//! 64-bit FNV-1a, xored into the run seed, and the result is passed through
//! one SplitMix64 finalizer round. Stage names used by the pipeline are
//! listed in [`stage`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod stage {
    pub const COHORT: &str = "cohort";
    pub const AOI_LAYOUT: &str = "aoi-layout";
    pub const SPLIT: &str = "split";
    pub const INIT: &str = "init";
    pub const SHUFFLE: &str = "shuffle";
    pub const TRAIN: &str = "train";
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stage: &str) -> u64 {
    splitmix64(seed ^ fnv1a(stage.as_bytes()))
}

pub fn rng(seed: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stage))
}

/// Order-sensitive checksum of a float slice over the exact bit patterns.
pub fn fingerprint(values: &[f64]) -> u64 {
    values.iter().fold(FNV_OFFSET, |h, v| splitmix64(h ^ v.to_bits()))
}
