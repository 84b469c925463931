//! Seeded random streams.
//!
//! Every stochastic draw in a run comes from a ChaCha8 stream keyed by the
//! run seed and selected by `(iteration, node)`, so any single draw can be
//! reproduced without replaying the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Returns the stream for `(seed, iteration, node)`.
pub fn stream(seed: u64, iteration: u64, node: u16) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 16) | u64::from(node));
    rng
}

/// Stream reserved for data sampling (mini-batches), disjoint from the
/// compression streams returned by [`stream`].
pub fn sampling_stream(seed: u64, iteration: u64, node: u16) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream((iteration << 16) | u64::from(node));
    rng
}
