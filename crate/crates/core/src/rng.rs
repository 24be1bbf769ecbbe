//! Counter-based RNG substreams.
//!
//! A stream is keyed by an arbitrary tuple of `u64` words; the ChaCha key is
//! the little-endian concatenation of the words, so distinct tuples give
//! independent streams regardless of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn substream(words: [u64; 4]) -> StreamRng {
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream for `(seed, sample, dimension, step)` as used by generation.
#[inline]
pub fn sample_stream(seed: u64, sample: u64, dim: u64, step: u64) -> StreamRng {
    substream([seed, sample, dim, step])
}
