//! Seeded random streams.
//!
//! Sample `i` of a run seeded with `seed` draws from its own stream, so
//! results do not depend on how samples are split across workers.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

pub type Stream = Xoshiro256PlusPlus;

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// Stream for sample `index` of a run seeded with `seed`.
pub fn sample_stream(seed: u64, index: u64) -> Stream {
    let mix = SplitMix64::seed_from_u64(index).next_u64();
    Stream::seed_from_u64(seed ^ mix)
}
