//! Counter-based seed derivation.
//!
//! Every stochastic component takes a `u64` seed. Independent sub-streams
//! (bags, rounds, dropout draws, repetitions) are derived from a master seed
//! and a pair of counters, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Seeded generator used throughout the crate.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `(stream, index)` from `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ 0x5851_F42D_4C95_7F2D);
    let b = splitmix64(a ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ index.wrapping_mul(0xA076_1D64_78BD_642F))
}

// Stream tags.
pub(crate) const STREAM_BAG: u64 = 1;
pub(crate) const STREAM_DROPOUT: u64 = 2;
pub(crate) const STREAM_ADMIT: u64 = 3;
pub(crate) const STREAM_TRAIN: u64 = 4;
pub(crate) const STREAM_REPETITION: u64 = 5;
pub(crate) const STREAM_RESAMPLE: u64 = 6;
