use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Seeded random stream backed by xoshiro256++.
///
/// The 64-bit seed is expanded to the 256-bit state with SplitMix64, so a
/// given seed produces the same draws on every platform. Independent child
/// streams are obtained with [`RngStream::derive`].
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: Xoshiro256PlusPlus,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by `(seed, tag)`. Does not advance `self`.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(derive_seed(self.seed, tag))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// `m` distinct indices from `0..n`, uniformly without replacement.
    pub fn sample_indices(&mut self, n: usize, m: usize) -> Result<Vec<usize>> {
        if m > n {
            return Err(Error::invalid(format!(
                "cannot sample {m} distinct indices from {n}"
            )));
        }
        Ok(rand::seq::index::sample(&mut self.inner, n, m).into_vec())
    }
}

/// Seed of the child stream `RngStream::new(seed).derive(tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
