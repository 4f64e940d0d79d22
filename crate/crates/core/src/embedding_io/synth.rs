//! Gaussian-cluster benchmark with class embeddings linearly coupled to the
//! feature centroids.
//!
//! Centroids are `μ_c = s · U a_c` with a shared random orthonormal basis `U`
//! (`feature_dim × latent_rank`), per-class coefficients `a_c` drawn uniformly
//! on the unit sphere, and a global scale `s` chosen so every centroid
//! coordinate lies strictly inside `(-0.8, 0.8)`. Equal-norm centroids keep
//! every class an extreme point of the class-embedding set, which a score
//! linear in the class vector needs in order to rank each class first. Class embeddings are `G μ_c + coupling noise` for a fixed
//! random `G`. With `latent_rank` no larger than the seen-class count the seen
//! classes pin down the centroid subspace, so unseen centroids are linearly
//! recoverable from their class embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

use super::partitions::PartitionSpec;
use super::records::{ClassEmbedding, ClassTable, EmbeddingRecord, FeatureTable};

const CENTROID_BOUND: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub samples_per_class: usize,
    pub feature_dim: usize,
    pub class_dim: usize,
    pub latent_rank: usize,
    /// Std of the per-record Gaussian noise around each centroid.
    pub feature_noise: f64,
    /// Std of the per-class Gaussian noise added to `G μ_c`.
    pub coupling_noise: f64,
    /// Entries of `G` are `N(0, (gain / √feature_dim)²)`.
    pub class_gain: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seen_classes: 8,
            unseen_classes: 2,
            samples_per_class: 100,
            feature_dim: 128,
            class_dim: 32,
            latent_rank: 4,
            feature_noise: 0.1,
            coupling_noise: 0.05,
            class_gain: 4.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seen_classes < 2 || self.unseen_classes < 2 {
            return Err(Error::Config(
                "synthetic benchmark needs at least 2 seen and 2 unseen classes".into(),
            ));
        }
        if self.samples_per_class == 0 || self.feature_dim == 0 || self.class_dim == 0 {
            return Err(Error::Config(
                "samples_per_class, feature_dim and class_dim must be positive".into(),
            ));
        }
        if self.latent_rank == 0 || self.latent_rank > self.feature_dim {
            return Err(Error::Config(format!(
                "latent_rank must be in 1..={}, got {}",
                self.feature_dim, self.latent_rank
            )));
        }
        if self.feature_noise < 0.0 || self.coupling_noise < 0.0 || self.class_gain <= 0.0 {
            return Err(Error::Config(
                "noise levels must be non-negative and class_gain positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub features: FeatureTable,
    pub classes: ClassTable,
    pub partition: PartitionSpec,
    /// `classes × feature_dim`, rows in label order `class00, class01, ...`.
    pub centroids: Matrix,
}

pub fn class_name(i: usize) -> String {
    format!("class{i:02}")
}

/// Modified Gram-Schmidt over the columns.
fn orthonormal_columns(m: Matrix) -> Matrix {
    let mut cols: Vec<Vec<f64>> = (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| m.get(r, c)).collect())
        .collect();
    for i in 0..cols.len() {
        for j in 0..i {
            let (done, rest) = cols.split_at_mut(i);
            let d = crate::numerics::dot(&rest[0], &done[j]);
            rest[0].iter_mut().zip(&done[j]).for_each(|(a, b)| *a -= d * b);
        }
        let n = crate::numerics::norm(&cols[i]);
        cols[i].iter_mut().for_each(|v| *v /= n);
    }
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            out.set(r, c, *v);
        }
    }
    out
}

pub fn synth_benchmark(config: &SynthConfig) -> Result<SynthBenchmark> {
    config.validate()?;
    let root = Rng::new(config.seed);
    let n_classes = config.seen_classes + config.unseen_classes;

    let mut basis_rng = root.fork("synth.basis");
    let basis = orthonormal_columns(basis_rng.gaussian(config.feature_dim, config.latent_rank, 0.0, 1.0));
    let mut coeffs = basis_rng.gaussian(n_classes, config.latent_rank, 0.0, 1.0);
    for r in 0..n_classes {
        let n = crate::numerics::norm(coeffs.row(r));
        coeffs.row_mut(r).iter_mut().for_each(|v| *v /= n);
    }
    let raw = coeffs.matmul_t(&basis)?;
    let peak = raw.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.99 * CENTROID_BOUND / peak } else { 0.0 };
    let centroids = raw.scale(scale);

    let mut map_rng = root.fork("synth.map");
    let gain = config.class_gain / (config.feature_dim as f64).sqrt();
    let coupling = map_rng.gaussian(config.class_dim, config.feature_dim, 0.0, gain);
    let mut class_vectors = centroids.matmul_t(&coupling)?;
    let mut coupling_rng = root.fork("synth.coupling");
    for v in class_vectors.as_mut_slice() {
        *v += coupling_rng.normal(0.0, config.coupling_noise);
    }

    let labels: Vec<String> = (0..n_classes).map(class_name).collect();
    let classes = ClassTable::new(
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| ClassEmbedding {
                label: l.clone(),
                synonyms: Vec::new(),
                vector: class_vectors.row(i).to_vec(),
            })
            .collect(),
    )?;

    let mut noise_rng = root.fork("synth.features");
    let mut records = Vec::with_capacity(n_classes * config.samples_per_class);
    for (c, label) in labels.iter().enumerate() {
        for i in 0..config.samples_per_class {
            let vector = centroids
                .row(c)
                .iter()
                .map(|&m| m + noise_rng.normal(0.0, config.feature_noise))
                .collect();
            records.push(EmbeddingRecord {
                id: format!("{label}-{i:04}"),
                class_label: label.clone(),
                vector,
            });
        }
    }

    let partition = PartitionSpec::new(
        "synthetic",
        labels[..config.seen_classes].to_vec(),
        labels[config.seen_classes..].to_vec(),
    )?;

    Ok(SynthBenchmark {
        features: FeatureTable::new(records)?,
        classes,
        partition,
        centroids,
    })
}
