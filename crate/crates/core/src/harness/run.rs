use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Sidecar;
use crate::classifier::{evaluate_top1, save_classifier, train_classifier};
use crate::diffusion::{generate_unseen, save_diffusion, train_diffusion};
use crate::embedding_io::{dataset_stats, FeatureTable};
use crate::error::{Error, Result};
use crate::numerics::rng::streams;
use crate::numerics::Rng;

use super::config::{load_dataset, ExperimentConfig, LoadedDataset, Method, StdConvention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    TrainDiffusion,
    Generate,
    TrainClassifier,
    Evaluate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::TrainDiffusion => "train_diffusion",
            Stage::Generate => "generate",
            Stage::TrainClassifier => "train_classifier",
            Stage::Evaluate => "evaluate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub accuracy: f64,
    /// Stages executed, in order.
    pub stages: Vec<Stage>,
    pub synthetic_count: usize,
    /// Final-epoch total diffusion loss, when a diffusion model was trained.
    pub diffusion_final_loss: Option<f64>,
    pub classifier_epoch_losses: Vec<f64>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub stage: Stage,
    pub message: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub dataset: String,
    pub partition: String,
    pub fingerprint: String,
    pub root_seed: u64,
    pub repetitions: usize,
    pub generation_count: usize,
    pub std_convention: StdConvention,
    pub balanced_accuracy: bool,
    /// Successful runs, sorted by seed.
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    /// Accuracies of `runs`, in the same order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl ExperimentReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.runs.len() == self.repetitions
    }

    /// Copy with every wall-clock field zeroed, for byte comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for run in &mut r.runs {
            run.wall_clock_secs = 0.0;
        }
        r
    }
}

/// Mean and standard deviation of a non-empty list. The sample convention
/// reports 0 for a single value.
pub fn aggregate(values: &[f64], convention: StdConvention) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("cannot aggregate an empty accuracy list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match convention {
        StdConvention::Population => n,
        StdConvention::Sample => (n - 1.0).max(1.0),
    };
    Ok((mean, (ss / denom).sqrt()))
}

fn fail(seed: u64, stage: Stage) -> impl Fn(Error) -> RunFailure {
    move |e| RunFailure {
        seed,
        stage,
        numerical: e.is_numerical(),
        message: e.to_string(),
    }
}

/// One full pipeline for one seed.
pub fn run_seed(
    config: &ExperimentConfig,
    data: &LoadedDataset,
    generation_count: usize,
    fingerprint: &str,
    seed: u64,
) -> std::result::Result<RunRecord, RunFailure> {
    let start = Instant::now();
    let rng = Rng::new(seed);
    let seen = data.seen();
    let unseen = data.unseen();
    let mut stages = Vec::new();
    let mut diffusion_final_loss = None;

    let synthetic = if config.method == Method::Zerodiffusion && generation_count > 0 {
        let diffusion_rng = rng.fork(streams::DIFFUSION);
        stages.push(Stage::TrainDiffusion);
        let trained = train_diffusion(&seen, &data.classes, &config.diffusion, &diffusion_rng)
            .map_err(fail(seed, Stage::TrainDiffusion))?;
        diffusion_final_loss = trained.trace.last().map(|t| t.total);
        if let Some(dir) = &config.checkpoint_dir {
            let sidecar = Sidecar {
                format: "ZDDM".into(),
                fingerprint: fingerprint.into(),
                seed,
                config: config.diffusion.clone(),
            };
            save_diffusion(dir.join(format!("diffusion-{seed}.zddm")), &trained.model, &sidecar)
                .map_err(fail(seed, Stage::TrainDiffusion))?;
        }
        stages.push(Stage::Generate);
        generate_unseen(
            &trained.model,
            &data.classes,
            &data.partition.unseen_classes,
            generation_count,
            &config.diffusion.generation,
            &diffusion_rng,
        )
        .map_err(fail(seed, Stage::Generate))?
    } else {
        FeatureTable::empty(seen.dim())
    };

    stages.push(Stage::TrainClassifier);
    let classifier_config = config.classifier_config();
    let trained = train_classifier(
        &seen,
        &synthetic,
        &data.classes,
        &classifier_config,
        &rng.fork(streams::CLASSIFIER),
    )
    .map_err(fail(seed, Stage::TrainClassifier))?;
    if let Some(dir) = &config.checkpoint_dir {
        let sidecar = Sidecar {
            format: "ZDCM".into(),
            fingerprint: fingerprint.into(),
            seed,
            config: classifier_config,
        };
        save_classifier(dir.join(format!("classifier-{seed}.zdcm")), &trained.model, &sidecar)
            .map_err(fail(seed, Stage::TrainClassifier))?;
    }

    stages.push(Stage::Evaluate);
    let accuracy = evaluate_top1(
        &trained.model,
        &unseen,
        &data.partition.unseen_classes,
        &data.classes,
        config.balanced_accuracy,
    )
    .map_err(fail(seed, Stage::Evaluate))?;

    Ok(RunRecord {
        seed,
        accuracy,
        stages,
        synthetic_count: synthetic.len(),
        diffusion_final_loss,
        classifier_epoch_losses: trained.epoch_losses,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `repetitions` seeded pipelines (`root_seed + i`) and aggregates them.
///
/// Configuration and data errors abort before any run. A failing run is
/// recorded in `failures` and the remaining runs still execute; if every run
/// fails, the first failure is returned as the error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let data = load_dataset(&config.dataset)?;
    let generation_count = match config.generation_count {
        Some(n) => n,
        None => dataset_stats(&data.features)?.generation_count(),
    };
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let seeds: Vec<u64> = (0..config.repetitions as u64).map(|i| config.root_seed + i).collect();
    let job = |&seed: &u64| run_seed(config, &data, generation_count, &fingerprint, seed);
    let outcomes: Vec<_> = if config.parallel {
        seeds.par_iter().map(job).collect()
    } else {
        seeds.iter().map(job).collect()
    };

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => runs.push(r),
            Err(f) => failures.push(f),
        }
    }
    runs.sort_by_key(|r| r.seed);
    let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    if accuracies.is_empty() {
        let f = failures.swap_remove(0);
        return Err(Error::Run {
            seed: f.seed,
            stage: f.stage.to_string(),
            message: f.message,
            numerical: f.numerical,
        });
    }
    let (mean, std) = aggregate(&accuracies, config.std_convention)?;

    Ok(ExperimentReport {
        method: config.method,
        dataset: data.name,
        partition: data.partition.name,
        fingerprint,
        root_seed: config.root_seed,
        repetitions: config.repetitions,
        generation_count,
        std_convention: config.std_convention,
        balanced_accuracy: config.balanced_accuracy,
        runs,
        failures,
        accuracies,
        mean,
        std,
    })
}
