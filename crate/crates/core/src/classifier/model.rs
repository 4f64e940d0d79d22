//! Compatibility scorers.
//!
//! Non-linear: `f(w, z) = (B · tanh(A · w))ᵀ · z`. Bilinear: `f(w, z) = wᵀ W z`.
//! Neither has bias terms. Both score any class vector, so the candidate set
//! can change between training and evaluation.
//!
//! Weights are stored so that batched scores are plain row-major products:
//! `A` is `feature × hidden`, `B` is `hidden × class`, `W` is
//! `feature × class`, and `scores = tanh(X A) B Zᵀ` for a feature batch `X`
//! and class matrix `Z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{init_uniform, tanh_act, GradientTape, Matrix, ParamStore, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Nonlinear,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityModel {
    variant: Variant,
    feature_dim: usize,
    hidden_dim: usize,
    class_dim: usize,
    params: ParamStore,
}

pub struct ScoreCache {
    features: Matrix,
    classes: Matrix,
    /// `tanh(X A)` for the non-linear variant.
    hidden: Option<Matrix>,
    hidden_deriv: Option<Matrix>,
    /// `tanh(X A) B` or `X W`: the batch projected into class space.
    projected: Matrix,
}

impl CompatibilityModel {
    pub fn nonlinear(feature_dim: usize, hidden_dim: usize, class_dim: usize, rng: &mut Rng) -> Self {
        let mut params = ParamStore::new();
        params.push("A", init_uniform(rng, feature_dim, hidden_dim));
        params.push("B", init_uniform(rng, hidden_dim, class_dim));
        Self {
            variant: Variant::Nonlinear,
            feature_dim,
            hidden_dim,
            class_dim,
            params,
        }
    }

    pub fn bilinear(feature_dim: usize, class_dim: usize, rng: &mut Rng) -> Self {
        let mut params = ParamStore::new();
        params.push("W", init_uniform(rng, feature_dim, class_dim));
        Self {
            variant: Variant::Bilinear,
            feature_dim,
            hidden_dim: 0,
            class_dim,
            params,
        }
    }

    /// Builds a model from explicit weights: `[A, B]` or `[W]`.
    pub fn from_weights(variant: Variant, weights: Vec<Matrix>) -> Result<Self> {
        let mut params = ParamStore::new();
        let (feature_dim, hidden_dim, class_dim) = match (variant, weights.as_slice()) {
            (Variant::Nonlinear, [a, b]) => {
                if a.cols() != b.rows() {
                    return Err(Error::dim("compatibility hidden dimension", a.cols(), b.rows()));
                }
                (a.rows(), a.cols(), b.cols())
            }
            (Variant::Bilinear, [w]) => (w.rows(), 0, w.cols()),
            _ => {
                return Err(Error::dim(
                    "compatibility weight count",
                    if variant == Variant::Nonlinear { 2 } else { 1 },
                    weights.len(),
                ))
            }
        };
        let names: &[&str] = match variant {
            Variant::Nonlinear => &["A", "B"],
            Variant::Bilinear => &["W"],
        };
        for (n, w) in names.iter().zip(weights) {
            params.push(*n, w);
        }
        Ok(Self {
            variant,
            feature_dim,
            hidden_dim,
            class_dim,
            params,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn class_dim(&self) -> usize {
        self.class_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Scores every (feature row, class row) pair: `N × C`.
    pub fn scores(&self, features: &Matrix, classes: &Matrix) -> Result<Matrix> {
        Ok(self.scores_with_cache(features, classes)?.0)
    }

    pub fn scores_with_cache(&self, features: &Matrix, classes: &Matrix) -> Result<(Matrix, ScoreCache)> {
        if features.cols() != self.feature_dim {
            return Err(Error::dim(
                "compatibility feature dimension",
                self.feature_dim,
                features.cols(),
            ));
        }
        if classes.cols() != self.class_dim {
            return Err(Error::dim(
                "compatibility class dimension",
                self.class_dim,
                classes.cols(),
            ));
        }
        let (hidden, hidden_deriv, projected) = match self.variant {
            Variant::Nonlinear => {
                let (h, d) = tanh_act(&features.matmul(self.params.get(0))?);
                let p = h.matmul(self.params.get(1))?;
                (Some(h), Some(d), p)
            }
            Variant::Bilinear => (None, None, features.matmul(self.params.get(0))?),
        };
        let scores = projected.matmul_t(classes)?;
        Ok((
            scores,
            ScoreCache {
                features: features.clone(),
                classes: classes.clone(),
                hidden,
                hidden_deriv,
                projected,
            },
        ))
    }

    /// Accumulates parameter gradients given `∂loss/∂scores`.
    pub fn backward(&self, cache: &ScoreCache, grad_scores: &Matrix, tape: &mut GradientTape) -> Result<()> {
        let d_projected = grad_scores.matmul(&cache.classes)?;
        debug_assert_eq!(d_projected.shape(), cache.projected.shape());
        match self.variant {
            Variant::Nonlinear => {
                let hidden = cache.hidden.as_ref().expect("non-linear cache has hidden");
                let deriv = cache.hidden_deriv.as_ref().expect("non-linear cache has derivative");
                tape.accumulate(1, &hidden.t_matmul(&d_projected)?)?;
                let d_hidden = d_projected.matmul_t(self.params.get(1))?;
                let d_pre = d_hidden.hadamard(deriv)?;
                tape.accumulate(0, &cache.features.t_matmul(&d_pre)?)?;
            }
            Variant::Bilinear => {
                tape.accumulate(0, &cache.features.t_matmul(&d_projected)?)?;
            }
        }
        Ok(())
    }
}

pub fn score(model: &CompatibilityModel, feature: &[f64], class_vec: &[f64]) -> Result<f64> {
    let s = model.scores(&Matrix::row_vector(feature), &Matrix::row_vector(class_vec))?;
    Ok(s.get(0, 0))
}

/// Scores of one feature against each row of `class_matrix`.
pub fn logits(model: &CompatibilityModel, feature: &[f64], class_matrix: &Matrix) -> Result<Vec<f64>> {
    if class_matrix.rows() == 0 {
        return Err(Error::dim("logits candidate count", ">= 1", 0));
    }
    Ok(model.scores(&Matrix::row_vector(feature), class_matrix)?.into_vec())
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the best-scoring candidate row.
pub fn predict_top1(model: &CompatibilityModel, feature: &[f64], candidates: &Matrix) -> Result<usize> {
    Ok(argmax(&logits(model, feature, candidates)?))
}
