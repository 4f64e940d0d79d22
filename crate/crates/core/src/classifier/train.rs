use serde::{Deserialize, Serialize};

use crate::embedding_io::{ClassTable, FeatureTable};
use crate::error::{Error, Result};
use crate::numerics::rng::streams;
use crate::numerics::{AdamConfig, AdamState, GradientTape, Rng};

use super::loss::{cross_entropy_loss, warp_loss};
use super::model::{predict_top1, CompatibilityModel, Variant};

pub const DEFAULT_HIDDEN: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierLoss {
    CrossEntropy,
    Warp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierTrainConfig {
    pub variant: Variant,
    pub loss: ClassifierLoss,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_dim: usize,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self::zerodiffusion()
    }
}

impl ClassifierTrainConfig {
    pub fn zerodiffusion() -> Self {
        Self {
            variant: Variant::Nonlinear,
            loss: ClassifierLoss::CrossEntropy,
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            batch_size: 64,
            epochs: 10,
            hidden_dim: DEFAULT_HIDDEN,
        }
    }

    pub fn ale() -> Self {
        Self {
            loss: ClassifierLoss::Warp,
            weight_decay: 1e-4,
            ..Self::zerodiffusion()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("classifier learning_rate must be positive".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("classifier weight_decay must be non-negative".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(
                "classifier batch_size, epochs and hidden_dim must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: CompatibilityModel,
    /// Labels the classifier was trained to separate, in order of first
    /// appearance in the training data.
    pub class_universe: Vec<String>,
    /// Batch-mean loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains a compatibility model on the union of `seen` and `synthetic`.
///
/// The training class universe is every label present in the combined table.
pub fn train_classifier(
    seen: &FeatureTable,
    synthetic: &FeatureTable,
    classes: &ClassTable,
    config: &ClassifierTrainConfig,
    rng: &Rng,
) -> Result<TrainedClassifier> {
    config.validate()?;
    let mut combined = seen.clone();
    if !synthetic.is_empty() {
        combined.extend(synthetic.clone())?;
    }
    if combined.is_empty() {
        return Err(Error::format(None, "classifier training table is empty"));
    }

    let universe = combined.class_labels();
    let class_matrix = classes.matrix(&universe)?;
    if universe.len() < 2 && config.loss == ClassifierLoss::Warp {
        return Err(Error::Config("warp training needs at least two classes".into()));
    }
    let index: std::collections::HashMap<&str, usize> =
        universe.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let targets: Vec<usize> = combined
        .records()
        .iter()
        .map(|r| index[r.class_label.as_str()])
        .collect();

    let mut init_rng = rng.fork(streams::INIT);
    let mut model = match config.variant {
        Variant::Nonlinear => {
            CompatibilityModel::nonlinear(combined.dim(), config.hidden_dim, classes.dim(), &mut init_rng)
        }
        Variant::Bilinear => CompatibilityModel::bilinear(combined.dim(), classes.dim(), &mut init_rng),
    };
    let mut shuffle_rng = rng.fork(streams::SHUFFLE);
    let mut negative_rng = rng.fork(streams::NEGATIVES);
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig::new(config.learning_rate, config.weight_decay),
    );
    let mut tape = GradientTape::zeros_like(model.params());
    let mut order: Vec<usize> = (0..combined.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let x = combined.matrix_of(idx);
            let t: Vec<usize> = idx.iter().map(|&i| targets[i]).collect();
            let (scores, cache) = model.scores_with_cache(&x, &class_matrix)?;
            let (loss, grad) = match config.loss {
                ClassifierLoss::CrossEntropy => cross_entropy_loss(&scores, &t)?,
                ClassifierLoss::Warp => warp_loss(&scores, &t, &mut negative_rng)?,
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            tape.zero();
            model.backward(&cache, &grad, &mut tape)?;
            adam.step(model.params_mut(), &tape)?;
            total += loss;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }

    Ok(TrainedClassifier {
        model,
        class_universe: universe,
        epoch_losses,
    })
}

/// Top-1 accuracy of `model` on `test` with `candidates` as the only
/// admissible labels. `balanced` averages per-class recall instead of
/// counting records.
pub fn evaluate_top1(
    model: &CompatibilityModel,
    test: &FeatureTable,
    candidates: &[String],
    classes: &ClassTable,
    balanced: bool,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::format(None, "evaluation table is empty"));
    }
    if candidates.is_empty() {
        return Err(Error::Config("evaluation needs at least one candidate class".into()));
    }
    let candidate_matrix = classes.matrix(candidates)?;
    let scores = model.scores(&test.to_matrix(), &candidate_matrix)?;
    let mut per_class: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
    for (r, record) in test.records().iter().enumerate() {
        let predicted = super::model::argmax(scores.row(r));
        let entry = per_class.entry(record.class_label.as_str()).or_default();
        entry.1 += 1;
        if candidates[predicted] == record.class_label {
            entry.0 += 1;
        }
    }
    Ok(if balanced {
        per_class.values().map(|&(c, n)| c as f64 / n as f64).sum::<f64>() / per_class.len() as f64
    } else {
        let correct: usize = per_class.values().map(|v| v.0).sum();
        correct as f64 / test.len() as f64
    })
}

/// Label-level convenience wrapper around [`predict_top1`].
pub fn predict_label<'a>(
    model: &CompatibilityModel,
    feature: &[f64],
    candidates: &'a [String],
    classes: &ClassTable,
) -> Result<&'a str> {
    let idx = predict_top1(model, feature, &classes.matrix(candidates)?)?;
    Ok(&candidates[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{synth_benchmark, SynthConfig};

    fn bench(noise: f64) -> crate::embedding_io::SynthBenchmark {
        synth_benchmark(&SynthConfig {
            feature_noise: noise,
            coupling_noise: 0.0,
            samples_per_class: 40,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn same_seed_same_parameters() {
        let b = bench(0.1);
        let seen = b.features.filter_classes(&b.partition.seen_classes);
        let cfg = ClassifierTrainConfig {
            epochs: 2,
            ..ClassifierTrainConfig::ale()
        };
        let a = train_classifier(&seen, &FeatureTable::empty(seen.dim()), &b.classes, &cfg, &Rng::new(5)).unwrap();
        let c = train_classifier(&seen, &FeatureTable::empty(seen.dim()), &b.classes, &cfg, &Rng::new(5)).unwrap();
        assert_eq!(a.model, c.model);
        assert_eq!(a.class_universe, b.partition.seen_classes);
    }

    #[test]
    fn empty_training_table_is_rejected() {
        let b = bench(0.1);
        let empty = FeatureTable::empty(b.features.dim());
        let err = train_classifier(
            &empty,
            &empty,
            &b.classes,
            &ClassifierTrainConfig::default(),
            &Rng::new(0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn class_without_embedding_is_rejected() {
        let b = bench(0.1);
        let only_seen: Vec<_> = b
            .classes
            .iter()
            .filter(|c| b.partition.seen_classes[1..].contains(&c.label))
            .cloned()
            .collect();
        let classes = ClassTable::new(only_seen).unwrap();
        let seen = b.features.filter_classes(&b.partition.seen_classes);
        let err = train_classifier(
            &seen,
            &FeatureTable::empty(seen.dim()),
            &classes,
            &ClassifierTrainConfig::default(),
            &Rng::new(0),
        );
        assert!(matches!(err, Err(Error::MissingClass(_))));
    }

    #[test]
    fn oracle_trained_model_is_perfect_on_zero_noise_benchmark() {
        // real unseen records stand in for a perfect generator
        let b = bench(0.0);
        let seen = b.features.filter_classes(&b.partition.seen_classes);
        let unseen = b.features.filter_classes(&b.partition.unseen_classes);
        let cfg = ClassifierTrainConfig {
            learning_rate: 1e-3,
            ..ClassifierTrainConfig::zerodiffusion()
        };
        let trained = train_classifier(&seen, &unseen, &b.classes, &cfg, &Rng::new(1)).unwrap();
        let acc = evaluate_top1(&trained.model, &unseen, &b.partition.unseen_classes, &b.classes, false).unwrap();
        assert_eq!(acc, 1.0);
        let first = &unseen.records()[0];
        let label = predict_label(&trained.model, &first.vector, &b.partition.unseen_classes, &b.classes).unwrap();
        assert_eq!(label, first.class_label);
    }

    #[test]
    fn loss_decreases_over_training() {
        let b = bench(0.1);
        let seen = b.features.filter_classes(&b.partition.seen_classes);
        let cfg = ClassifierTrainConfig {
            learning_rate: 1e-3,
            ..ClassifierTrainConfig::zerodiffusion()
        };
        let t = train_classifier(&seen, &FeatureTable::empty(seen.dim()), &b.classes, &cfg, &Rng::new(2)).unwrap();
        assert!(t.epoch_losses.last().unwrap() < t.epoch_losses.first().unwrap());
    }
}
