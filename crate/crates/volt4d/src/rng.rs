//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator, a
//! counter-based stream cipher RNG keyed by a single 64-bit seed. Independent
//! substreams are selected through the cipher's 64-bit stream counter, so any
//! component (a phantom, a trajectory, an epoch shuffle) can derive its own
//! generator from `(master seed, domain, index)` without coordinating with
//! the rest of the pipeline. Same seed, same stream — always.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream-id domains. Keeps substreams of one master seed disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    ParamInit = 1,
    Phantom = 2,
    Trajectory = 3,
    Noise = 4,
    Shuffle = 5,
    Split = 6,
    Magnitude = 7,
    GradCheck = 8,
    Augment = 9,
}

/// Generator for `(seed, domain, index)`. The domain tag occupies the top
/// byte of the stream counter, leaving 56 bits of index space.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 56));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | index);
    rng
}

/// Folds an index into a seed to derive a child seed, for components that
/// need a whole seed of their own (e.g. per-run model seeds in a study).
/// SplitMix64 finalizer; bijective in the combined value.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
