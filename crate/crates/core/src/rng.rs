//! Seeded pseudo-random source for measurement sampling.
//!
//! xoshiro256** whose state is filled by four consecutive splitmix64 outputs
//! of the seed. Uniform draws keep the top 53 bits of each output, so a given
//! seed yields the same stream in any implementation of these generators.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    inner: Xoshiro256StarStar,
}

impl Xoshiro256 {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
