//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, stream, index)`, so a random
//! field can be evaluated cell by cell in any order and on any thread.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed SplitMix64 stream: `uniform(index)` is the `index`-th draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: mix64(seed.wrapping_add(GOLDEN)) }
    }

    /// Independent sub-stream, e.g. one per field layer.
    pub fn split(&self, stream: u64) -> Self {
        Self { key: mix64(self.key ^ mix64(stream.wrapping_mul(GOLDEN).wrapping_add(1))) }
    }

    #[inline]
    pub fn u64_at(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform draw on [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        (self.u64_at(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_in(&self, index: u64, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform(index)
    }
}
