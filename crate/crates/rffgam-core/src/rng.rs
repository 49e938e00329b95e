//! Seed-stream derivation.
//!
//! Every randomized stage draws from its own ChaCha20 stream derived from the
//! run seed and a fixed stream label, so the streams are mutually independent
//! and each stage is bitwise reproducible regardless of what the other stages
//! consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Fixed stream labels, one per randomized stage.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    TrainTestSplit = 1,
    FitValSplit = 2,
    FrequencySample = 3,
    FrequencyWalk = 4,
    GmmInit = 5,
    Bootstrap = 6,
    /// Base label for augmentation; each source row offsets from it.
    Augment = 7,
    MonteCarloCv = 8,
    SearchSubset = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for a (seed, stage) pair.
pub fn stream(seed: u64, which: Stream) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(splitmix64(seed ^ splitmix64(which as u64)))
}

/// RNG for a (seed, stage, index) triple, used where work items must be
/// independently reproducible (augmentation rows, Monte Carlo repeats).
pub fn indexed_stream(seed: u64, which: Stream, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(splitmix64(
        splitmix64(seed ^ splitmix64(which as u64)) ^ splitmix64(index.wrapping_add(1)),
    ))
}
