//! Position-independent seed derivation.
//!
//! Every random decision in a sweep is keyed by a stable tuple (master seed,
//! entity id, purpose tag) instead of by draw order, so that a task produces
//! the same bytes no matter which worker runs it or when.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a short word sequence.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(GOLDEN, |acc, &w| {
        mix64(acc.wrapping_add(GOLDEN) ^ mix64(w.wrapping_add(GOLDEN)))
    })
}

/// Purpose tags keep derived streams for different jobs apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Negatives = 2,
    Init = 3,
    Shuffle = 4,
    Entity = 5,
    Subsample = 6,
    Svd = 7,
}

pub fn derive(seed: u64, stream: Stream, words: &[u64]) -> u64 {
    let mut all = Vec::with_capacity(words.len() + 2);
    all.push(seed);
    all.push(stream as u64);
    all.extend_from_slice(words);
    hash_words(&all)
}

pub fn rng(seed: u64, stream: Stream, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, words))
}
