//! Seeded random streams.
//!
//! Every consumer (weight init, corruption noise, dropout, shuffling, ...) owns
//! its own stream. A stream's seed is `splitmix64(root ^ fnv1a(label))`, so the
//! sequence a consumer sees depends only on the root seed and its label, never
//! on which other consumers exist or how much they have drawn.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::Matrix;

/// Well-known stream labels.
pub mod streams {
    pub const INIT: &str = "init";
    pub const NOISE: &str = "noise";
    pub const JITTER: &str = "jitter";
    pub const DROPOUT: &str = "dropout";
    pub const SHUFFLE: &str = "shuffle";
    pub const GENERATE: &str = "generate";
    pub const NEGATIVES: &str = "negatives";
    pub const DIFFUSION: &str = "diffusion";
    pub const CLASSIFIER: &str = "classifier";
    pub const DATA: &str = "data";
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream named `label`. Does not advance `self`.
    pub fn fork(&self, label: &str) -> Rng {
        Rng::new(derive_seed(self.seed, label))
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.inner.random::<f64>()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Fills a matrix with i.i.d. `N(mean, std²)` draws.
    pub fn gaussian(&mut self, rows: usize, cols: usize, mean: f64, std: f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = self.normal(mean, std);
        }
        m
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, low: f64, high: f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = self.uniform(low, high);
        }
        m
    }
}

/// Free-function form of [`Rng::gaussian`].
pub fn gaussian_sample(rng: &mut Rng, rows: usize, cols: usize, mean: f64, std: f64) -> Matrix {
    rng.gaussian(rows, cols, mean, std)
}

pub fn derive_seed(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a(label.as_bytes()))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
