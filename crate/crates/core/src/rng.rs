//! Seed derivation for the independent random streams of a run.
//!
//! Every consumer of randomness (data generation, train/test split, client
//! sampling, prediction-set construction, DP noise, each client's minibatch
//! schedule) owns a stream keyed by `(seed, purpose, round, id)`. Streams never
//! share state, so results do not depend on the order in which clients run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Synthetic = 1,
    Split = 2,
    Init = 3,
    ClientSampling = 4,
    PredictionSets = 5,
    DpNoise = 6,
    LocalSgd = 7,
    Centralized = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a purpose tag, a round index and an id.
pub fn derive_seed(seed: u64, stream: Stream, round: u64, id: u64) -> u64 {
    let mut h = splitmix64(seed);
    for word in [stream as u64, round, id] {
        h = splitmix64(h ^ word);
    }
    h
}

pub fn stream_rng(seed: u64, stream: Stream, round: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, round, id))
}
