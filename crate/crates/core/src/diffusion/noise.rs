//! Epoch-percentage corruption of feature embeddings and class-vector jitter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Standard deviation of `N(0, 0.1)`, read as variance 0.1.
pub const DEFAULT_NOISE_STD: f64 = 0.316_227_766_016_837_94;

/// Noise level as a linear function of training progress: `p = e / (E − 1)`,
/// constant within an epoch, `0` on the first epoch and `1` on the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub total_epochs: usize,
    pub noise_std: f64,
}

impl NoiseSchedule {
    pub fn new(total_epochs: usize, noise_std: f64) -> Self {
        Self {
            total_epochs,
            noise_std,
        }
    }

    pub fn progress(&self, epoch: usize) -> f64 {
        if self.total_epochs <= 1 {
            0.0
        } else {
            (epoch.min(self.total_epochs - 1)) as f64 / (self.total_epochs - 1) as f64
        }
    }
}

fn check_progress(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Range(format!("epoch percentage {p} not in [0, 1]")));
    }
    Ok(())
}

/// `x + p·ε`, `ε ~ N(0, noise_std²)` element-wise. At `p = 0` the input is
/// returned bit-for-bit (noise is still drawn so the stream position does not
/// depend on `p`).
pub fn corrupt(feature: &[f64], p: f64, noise_std: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    check_progress(p)?;
    Ok(feature
        .iter()
        .map(|&x| {
            let eps = rng.normal(0.0, noise_std);
            if p == 0.0 {
                x
            } else {
                x + p * eps
            }
        })
        .collect())
}

/// Row-wise [`corrupt`] over a batch.
pub fn corrupt_batch(features: &Matrix, p: f64, noise_std: f64, rng: &mut Rng) -> Result<Matrix> {
    let mut out = Matrix::zeros(features.rows(), features.cols());
    for r in 0..features.rows() {
        let row = corrupt(features.row(r), p, noise_std, rng)?;
        out.row_mut(r).copy_from_slice(&row);
    }
    Ok(out)
}

/// `σ(z) + ε`, `ε ~ N(0, noise_std²)`. Training-time only.
pub fn jitter_class(class_vec: &[f64], noise_std: f64, rng: &mut Rng) -> Vec<f64> {
    class_vec.iter().map(|&z| z + rng.normal(0.0, noise_std)).collect()
}
