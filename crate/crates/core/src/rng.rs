//! Seeded random streams.
//!
//! Every trial seed drives a ChaCha8 generator; the independent pieces of a
//! trial (subspace, waveform coefficients, noise, frequency draw) read from
//! distinct ChaCha stream ids of that seed, so changing how many numbers one
//! piece consumes never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Subspace = 1,
    Waveforms = 2,
    Noise = 3,
    Frequencies = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit seed: `h <- splitmix64(h ^ w)`
/// starting from `h = 0`.
pub fn mix_seed(words: &[u64]) -> u64 {
    words.iter().fold(0u64, |h, &w| splitmix64(h ^ w))
}
