//! Deterministic, portable random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A ChaCha12 generator addressed by `(seed, stream)`.
///
/// The same pair reproduces the same draws on every platform. Independent
/// consumers (data generation, hole punching, each imputation chain, fold
/// shuffling) take distinct streams so that parallel scheduling cannot change
/// results.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on a stream derived from this one and `tag`.
    /// Does not advance `self`.
    pub fn substream(&self, tag: u64) -> SeededRng {
        SeededRng::new(self.seed, mix64(self.stream ^ mix64(tag.wrapping_add(0x9e37_79b9))))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// SplitMix64 finalizer; used to derive seeds and stream ids.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
