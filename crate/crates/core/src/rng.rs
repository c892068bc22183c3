//! Counter-based RNG stream derivation.
//!
//! Every stochastic operation derives its generator from `(base seed, stream id)` so a
//! parallel run draws exactly the same numbers as a serial one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Packs two indices into one stream id.
pub fn pair_id(a: usize, b: usize) -> u64 {
    ((a as u64) << 32) | (b as u64 & 0xffff_ffff)
}
