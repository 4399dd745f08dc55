//! Deterministic RNG plumbing.
//!
//! Every stochastic routine in the crate draws from a `ChaCha8Rng` keyed by a
//! user seed plus an explicit stream id, so independent consumers (the two
//! modalities, Monte-Carlo trials, parameter-group initializers) never share
//! a stream and any unit of work replays in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids, so call sites don't collide by accident.
pub mod stream {
    pub const MODALITY_X: u64 = 0;
    pub const MODALITY_Y: u64 = 1;
    pub const THETA: u64 = 2;
    pub const DESIGN_X: u64 = 3;
    pub const DESIGN_Y: u64 = 4;
    pub const INIT_ADAPTER_X: u64 = 5;
    pub const INIT_ADAPTER_Y: u64 = 6;
    pub const INIT_TRUNK: u64 = 7;
    pub const INIT_HEAD_X: u64 = 8;
    pub const INIT_HEAD_Y: u64 = 9;
    pub const BATCH_ORDER_X: u64 = 10;
    pub const BATCH_ORDER_Y: u64 = 11;
    pub const SCHEDULE: u64 = 12;
    pub const TASK_DATA: u64 = 13;
    pub const PROBE: u64 = 14;
}

/// RNG for (`seed`, `stream`). Identical arguments yield identical streams.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.into());
    rng
}

/// Derive a child seed for an indexed unit of work (trial, config, run).
///
/// SplitMix64 finalizer over seed and index; statistically independent child
/// streams while staying replayable from (seed, index) alone.
pub fn derive(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
