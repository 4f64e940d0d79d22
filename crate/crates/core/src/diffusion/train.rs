use serde::{Deserialize, Serialize};

use crate::embedding_io::{ClassTable, EmbeddingRecord, FeatureTable};
use crate::error::{Error, Result};
use crate::numerics::rng::streams;
use crate::numerics::{clip_global_norm, AdamConfig, AdamState, GradientTape, Matrix, Rng};

use super::loss::{evaluate_loss, Bandwidth, LossComponents, LossWeights};
use super::model::{DiffusionModel, DEFAULT_DROPOUT};
use super::noise::{corrupt, jitter_class, NoiseSchedule, DEFAULT_NOISE_STD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_max_norm: f64,
    pub loss_weights: LossWeights,
    /// Defaults to the feature dimension.
    pub hidden_dim: Option<usize>,
    pub dropout: f64,
    pub noise_std: f64,
    pub jitter_std: f64,
    pub generation: GenerationConfig,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 64,
            epochs: 50,
            clip_max_norm: 1.0,
            loss_weights: LossWeights::default(),
            hidden_dim: None,
            dropout: DEFAULT_DROPOUT,
            noise_std: DEFAULT_NOISE_STD,
            jitter_std: DEFAULT_NOISE_STD,
            generation: GenerationConfig::default(),
        }
    }
}

impl DiffusionTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.clip_max_norm];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(
                "diffusion learning_rate and clip_max_norm must be positive".into(),
            ));
        }
        if self.batch_size < 2 || self.epochs == 0 {
            return Err(Error::Config(
                "diffusion batch_size must be >= 2 and epochs >= 1".into(),
            ));
        }
        if self.weight_decay < 0.0 || self.noise_std < 0.0 || self.jitter_std < 0.0 {
            return Err(Error::Config(
                "diffusion weight_decay and noise levels must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.hidden_dim == Some(0) {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        self.loss_weights.validate()?;
        self.generation.validate()
    }
}

/// How synthetic samples are drawn from a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Std of the pure-noise input in the feature slot.
    pub noise_std: f64,
    /// Extra re-corrupt/re-denoise passes at decreasing noise; 0 is single-pass.
    pub refine_steps: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            noise_std: DEFAULT_NOISE_STD,
            refine_steps: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config("generation noise_std must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub progress: f64,
    /// Batch-averaged components.
    pub components: LossComponents,
    pub total: f64,
    pub mean_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedDiffusion {
    pub model: DiffusionModel,
    pub trace: Vec<EpochTrace>,
}

/// Splits `n` shuffled indices into batches of `size`, folding a trailing
/// singleton into the previous batch since the loss needs two rows.
pub(crate) fn batch_ranges(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().end = last.end;
    }
    out
}

/// Trains the denoiser on seen-class records.
pub fn train_diffusion(
    seen: &FeatureTable,
    classes: &ClassTable,
    config: &DiffusionTrainConfig,
    rng: &Rng,
) -> Result<TrainedDiffusion> {
    config.validate()?;
    if seen.len() < 2 {
        return Err(Error::format(
            None,
            "diffusion training needs at least two seen records",
        ));
    }
    let class_rows: Vec<&[f64]> = seen
        .records()
        .iter()
        .map(|r| classes.vector(&r.class_label))
        .collect::<Result<_>>()?;

    let feature_dim = seen.dim();
    let class_dim = classes.dim();
    let hidden = config.hidden_dim.unwrap_or(feature_dim);
    let mut model = DiffusionModel::new(feature_dim, class_dim, hidden, &mut rng.fork(streams::INIT));
    model.dropout_rate = config.dropout;

    let mut shuffle_rng = rng.fork(streams::SHUFFLE);
    let mut noise_rng = rng.fork(streams::NOISE);
    let mut jitter_rng = rng.fork(streams::JITTER);
    let mut dropout_rng = rng.fork(streams::DROPOUT);

    let schedule = NoiseSchedule::new(config.epochs, config.noise_std);
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig::new(config.learning_rate, config.weight_decay),
    );
    let mut tape = GradientTape::zeros_like(model.params());
    let mut order: Vec<usize> = (0..seen.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let p = schedule.progress(epoch);
        shuffle_rng.shuffle(&mut order);
        let batches = batch_ranges(order.len(), config.batch_size);
        let mut sum = LossComponents::default();
        let mut total = 0.0;
        let mut grad_norm = 0.0;

        for (batch_idx, range) in batches.iter().enumerate() {
            let idx = &order[range.clone()];
            let real = seen.matrix_of(idx);
            let mut noisy = Matrix::zeros(idx.len(), feature_dim);
            let mut cond = Matrix::zeros(idx.len(), class_dim);
            for (row, &i) in idx.iter().enumerate() {
                noisy
                    .row_mut(row)
                    .copy_from_slice(&corrupt(real.row(row), p, schedule.noise_std, &mut noise_rng)?);
                cond.row_mut(row)
                    .copy_from_slice(&jitter_class(class_rows[i], config.jitter_std, &mut jitter_rng));
            }

            let (generated, cache) = model.forward(&noisy, &cond, &mut dropout_rng, true)?;
            let eval = evaluate_loss(&generated, &real, &config.loss_weights, Bandwidth::MedianHeuristic)?;
            if !eval.total.is_finite() || !eval.components.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            tape.zero();
            model.backward(&cache, &eval.grad, &mut tape)?;
            grad_norm += clip_global_norm(&mut tape, config.clip_max_norm);
            adam.step(model.params_mut(), &tape)?;
            if !model.params().is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }

            sum.add_scaled(&eval.components, 1.0);
            total += eval.total;
        }

        let n = batches.len() as f64;
        let mut components = LossComponents::default();
        components.add_scaled(&sum, 1.0 / n);
        trace.push(EpochTrace {
            epoch,
            progress: p,
            components,
            total: total / n,
            mean_grad_norm: grad_norm / n,
        });
    }

    Ok(TrainedDiffusion { model, trace })
}

/// Draws `count_per_class` synthetic feature embeddings for each label: pure
/// noise in the feature slot, the exact class vector in the class slot, one
/// inference-mode pass (plus optional refinement passes).
pub fn generate_unseen(
    model: &DiffusionModel,
    classes: &ClassTable,
    labels: &[String],
    count_per_class: usize,
    config: &GenerationConfig,
    rng: &Rng,
) -> Result<FeatureTable> {
    config.validate()?;
    if classes.dim() != model.class_dim() {
        return Err(Error::dim(
            "generation class dimension",
            model.class_dim(),
            classes.dim(),
        ));
    }
    let mut noise_rng = rng.fork(streams::GENERATE);
    let mut unused_dropout = rng.fork(streams::DROPOUT);
    let mut table = FeatureTable::empty(model.feature_dim());
    for label in labels {
        if count_per_class == 0 {
            break;
        }
        let z = classes.vector(label)?;
        let mut cond = Matrix::zeros(count_per_class, model.class_dim());
        for r in 0..count_per_class {
            cond.row_mut(r).copy_from_slice(z);
        }
        let input = noise_rng.gaussian(count_per_class, model.feature_dim(), 0.0, config.noise_std);
        let mut out = model.forward(&input, &cond, &mut unused_dropout, false)?.0;
        for step in 1..=config.refine_steps {
            let p = 1.0 - step as f64 / (config.refine_steps + 1) as f64;
            let mut noisy = Matrix::zeros(out.rows(), out.cols());
            for r in 0..out.rows() {
                noisy
                    .row_mut(r)
                    .copy_from_slice(&corrupt(out.row(r), p, config.noise_std, &mut noise_rng)?);
            }
            out = model.forward(&noisy, &cond, &mut unused_dropout, false)?.0;
        }
        for r in 0..count_per_class {
            table.push(EmbeddingRecord {
                id: format!("synthetic-{label}-{r:05}"),
                class_label: label.clone(),
                vector: out.row(r).to_vec(),
            })?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{synth_benchmark, SynthConfig};

    fn small_bench() -> crate::embedding_io::SynthBenchmark {
        synth_benchmark(&SynthConfig {
            samples_per_class: 20,
            feature_dim: 16,
            class_dim: 8,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn small_config(epochs: usize) -> DiffusionTrainConfig {
        DiffusionTrainConfig {
            epochs,
            batch_size: 16,
            ..DiffusionTrainConfig::default()
        }
    }

    #[test]
    fn batches_never_end_with_a_singleton() {
        assert_eq!(batch_ranges(129, 64), vec![0..64, 64..129]);
        assert_eq!(batch_ranges(130, 64), vec![0..64, 64..128, 128..130]);
        assert_eq!(batch_ranges(5, 64), vec![0..5]);
    }

    #[test]
    fn single_epoch_runs_at_zero_noise() {
        let b = small_bench();
        let seen = b.features.filter_classes(&b.partition.seen_classes);
        let t = train_diffusion(&seen, &b.classes, &small_config(1), &Rng::new(0)).unwrap();
        assert_eq!(t.trace.len(), 1);
        assert_eq!(t.trace[0].progress, 0.0);
    }

    #[test]
    fn same_seed_same_trace() {
        let b = small_bench();
        let seen = b.features.filter_classes(&b.partition.seen_classes);
        let a = train_diffusion(&seen, &b.classes, &small_config(3), &Rng::new(4)).unwrap();
        let c = train_diffusion(&seen, &b.classes, &small_config(3), &Rng::new(4)).unwrap();
        assert_eq!(a.trace, c.trace);
        assert_eq!(a.model, c.model);
    }

    #[test]
    fn missing_class_embedding_is_named() {
        let b = small_bench();
        let mut seen = b.features.filter_classes(&b.partition.seen_classes);
        seen.push(EmbeddingRecord {
            id: "stray".into(),
            class_label: "mystery".into(),
            vector: vec![0.0; 16],
        })
        .unwrap();
        let err = train_diffusion(&seen, &b.classes, &small_config(1), &Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::MissingClass(ref c) if c == "mystery"));
    }

    #[test]
    fn generation_counts_labels_and_bounds() {
        let b = small_bench();
        let model = DiffusionModel::new(16, 8, 16, &mut Rng::new(1));
        let out = generate_unseen(
            &model,
            &b.classes,
            &b.partition.unseen_classes,
            7,
            &GenerationConfig::default(),
            &Rng::new(2),
        )
        .unwrap();
        assert_eq!(out.len(), 14);
        assert_eq!(out.records()[7].class_label, "class09");
        assert!(out
            .records()
            .iter()
            .all(|r| r.vector.iter().all(|v| (-1.0..=1.0).contains(v))));

        let refined = generate_unseen(
            &model,
            &b.classes,
            &b.partition.unseen_classes,
            3,
            &GenerationConfig {
                refine_steps: 2,
                ..GenerationConfig::default()
            },
            &Rng::new(2),
        )
        .unwrap();
        assert_eq!(refined.len(), 6);
    }
}
