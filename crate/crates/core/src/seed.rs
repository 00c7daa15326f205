//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! master seed and a stream index, so results never depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: u64) -> StreamRng {
    rng_from_seed(derive_seed(master, stream))
}

// Stream tags used by the pipeline stages.
pub(crate) const TAG_PARTITION: u64 = 0x5041_5254;
pub(crate) const TAG_BCFI: u64 = 0x4243_4649;
pub(crate) const TAG_FULL_MODEL: u64 = 0x4655_4c4c;
pub(crate) const TAG_REDUCED_MODEL: u64 = 0x5245_4455;
pub(crate) const TAG_TEST: u64 = 0x5445_5354;
