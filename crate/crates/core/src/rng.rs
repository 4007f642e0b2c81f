//! Counter-based random streams.
//!
//! The generator is SplitMix64 evaluated at an explicit counter: draw `n` of a
//! stream with seed `s` is `mix64(s + (n + 1) * GOLDEN_GAMMA)`, where `mix64`
//! is the SplitMix64 finalizer (Stafford variant 13). Only wrapping integer
//! arithmetic is involved, so the raw `u64` sequence is identical on every
//! platform. Streams for independent work items are derived from a base seed
//! with [`RngStream::derive`], which makes results independent of the order in
//! which work items are processed.

use rand_core::RngCore;
use rand_distr::{Distribution, Gamma, Normal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner deterministic random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Child stream keyed by `key`. Does not advance `self`.
    pub fn derive(&self, key: u64) -> RngStream {
        let k = mix64(key.wrapping_mul(GOLDEN_GAMMA).wrapping_add(0x632B_E59B_D9B4_E019));
        RngStream::new(mix64(mix64(self.seed) ^ k))
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.unit();
        if hi <= lo {
            lo
        } else {
            lo + (hi - lo) * u
        }
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift, unbiased by rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_word() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn coin(&mut self) -> bool {
        self.next_word() >> 63 == 1
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        Normal::new(mean, std_dev)
            .expect("finite normal parameters")
            .sample(self)
    }

    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        Gamma::new(shape, scale)
            .expect("positive gamma parameters")
            .sample(self)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
