//! Seeded, splittable random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, path)`. Forking a
//! child stream depends only on the parent's key and the child index, never
//! on how many draws the parent has made, so Monte Carlo work can be split
//! across threads without changing results.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    key: u64,
    draws: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_key(seed, 0)
    }

    fn with_key(seed: u64, key: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(key);
        RngStream {
            seed,
            key,
            draws: 0,
            inner,
        }
    }

    /// Independent child stream number `index`.
    pub fn fork(&self, index: u64) -> RngStream {
        let key = splitmix64(self.key ^ splitmix64(index.wrapping_add(1)));
        Self::with_key(self.seed, key)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of values drawn from this stream so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.inner.gen::<f64>()
    }

    /// Uniform draw from `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.draws += 1;
        self.inner.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.inner.next_u64()
    }
}
