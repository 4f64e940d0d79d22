use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{ClassifierLoss, ClassifierTrainConfig, Variant};
use crate::diffusion::DiffusionTrainConfig;
use crate::embedding_io::{
    builtin_partition, load_class_table, load_feature_table, load_partition, synth_benchmark, ClassTable, FeatureTable,
    PartitionSpec, SynthConfig,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Zerodiffusion,
    Ale,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zerodiffusion" | "zd" => Ok(Method::Zerodiffusion),
            "ale" => Ok(Method::Ale),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected zerodiffusion or ale)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N - 1.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSource {
    File(PathBuf),
    Builtin { dataset: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SynthConfig),
    Files {
        features: PathBuf,
        classes: PathBuf,
        partition: PartitionSource,
    },
}

/// Per-field overrides on top of the method's classifier defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<ClassifierLoss>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
}

impl ClassifierOverrides {
    pub fn apply(&self, mut base: ClassifierTrainConfig) -> ClassifierTrainConfig {
        base.variant = self.variant.unwrap_or(base.variant);
        base.loss = self.loss.unwrap_or(base.loss);
        base.learning_rate = self.learning_rate.unwrap_or(base.learning_rate);
        base.weight_decay = self.weight_decay.unwrap_or(base.weight_decay);
        base.batch_size = self.batch_size.unwrap_or(base.batch_size);
        base.epochs = self.epochs.unwrap_or(base.epochs);
        base.hidden_dim = self.hidden_dim.unwrap_or(base.hidden_dim);
        base
    }
}

fn default_repetitions() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub method: Method,
    pub dataset: DatasetSource,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub diffusion: DiffusionTrainConfig,
    #[serde(default)]
    pub classifier: ClassifierOverrides,
    /// Synthetic samples per unseen class; defaults to the rounded average
    /// number of records per class in the feature table.
    #[serde(default)]
    pub generation_count: Option<usize>,
    #[serde(default)]
    pub std_convention: StdConvention,
    #[serde(default)]
    pub balanced_accuracy: bool,
    /// Runs seeds concurrently. Results do not depend on it.
    #[serde(default = "default_true")]
    pub parallel: bool,
    /// Directory for per-seed model checkpoints; none are written when unset.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(method: Method, dataset: DatasetSource) -> Self {
        Self {
            method,
            dataset,
            repetitions: default_repetitions(),
            root_seed: 0,
            diffusion: DiffusionTrainConfig::default(),
            classifier: ClassifierOverrides::default(),
            generation_count: None,
            std_convention: StdConvention::default(),
            balanced_accuracy: false,
            parallel: true,
            checkpoint_dir: None,
        }
    }

    /// Parses a JSON config, resolving relative paths against the file's
    /// directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::Files {
            features,
            classes,
            partition,
        } = &mut self.dataset
        {
            fix(features);
            fix(classes);
            if let PartitionSource::File(p) = partition {
                fix(p);
            }
        }
        if let Some(p) = &mut self.checkpoint_dir {
            fix(p);
        }
    }

    pub fn classifier_config(&self) -> ClassifierTrainConfig {
        let base = match self.method {
            Method::Zerodiffusion => ClassifierTrainConfig::zerodiffusion(),
            Method::Ale => ClassifierTrainConfig::ale(),
        };
        self.classifier.apply(base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.method == Method::Zerodiffusion {
            self.diffusion.validate()?;
        }
        self.classifier_config().validate()?;
        match &self.dataset {
            DatasetSource::Synthetic(s) => s.validate(),
            DatasetSource::Files {
                features,
                classes,
                partition,
            } => {
                let mut paths = vec![features, classes];
                if let PartitionSource::File(p) = partition {
                    paths.push(p);
                }
                for p in paths {
                    if !p.is_file() {
                        return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
                    }
                }
                Ok(())
            }
        }
    }

    /// Canonical JSON: keys sorted, no whitespace.
    pub fn canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn fingerprint(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Features, class vectors and partition for one experiment.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub features: FeatureTable,
    pub classes: ClassTable,
    pub partition: PartitionSpec,
}

impl LoadedDataset {
    pub fn seen(&self) -> FeatureTable {
        self.features.filter_classes(&self.partition.seen_classes)
    }

    pub fn unseen(&self) -> FeatureTable {
        self.features.filter_classes(&self.partition.unseen_classes)
    }
}

pub fn load_dataset(source: &DatasetSource) -> Result<LoadedDataset> {
    let ds = match source {
        DatasetSource::Synthetic(cfg) => {
            let b = synth_benchmark(cfg)?;
            LoadedDataset {
                name: "synthetic".into(),
                features: b.features,
                classes: b.classes,
                partition: b.partition,
            }
        }
        DatasetSource::Files {
            features,
            classes,
            partition,
        } => {
            let (name, partition) = match partition {
                PartitionSource::File(p) => (
                    features
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    load_partition(p)?,
                ),
                PartitionSource::Builtin { dataset, name } => (dataset.clone(), builtin_partition(dataset, name)?),
            };
            LoadedDataset {
                name,
                features: load_feature_table(features)?,
                classes: load_class_table(classes)?,
                partition,
            }
        }
    };
    for label in ds.partition.seen_classes.iter().chain(&ds.partition.unseen_classes) {
        ds.classes.vector(label)?;
    }
    if ds.seen().is_empty() {
        return Err(Error::format(
            None,
            format!("no records for the seen classes of `{}`", ds.partition.name),
        ));
    }
    if ds.unseen().is_empty() {
        return Err(Error::format(
            None,
            format!("no records for the unseen classes of `{}`", ds.partition.name),
        ));
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> ExperimentConfig {
        ExperimentConfig::new(Method::Zerodiffusion, DatasetSource::Synthetic(SynthConfig::default()))
    }

    #[test]
    fn minimal_json_takes_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"dataset": {"synthetic": {}}}"#).unwrap();
        assert_eq!(cfg, synthetic());
        assert_eq!(cfg.repetitions, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"dataset": {"synthetic": {}}, "reps": 3}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"dataset": {"synthetic": {"nosie": 1}}}"#).is_err());
        assert!(
            serde_json::from_str::<ExperimentConfig>(r#"{"dataset": {"synthetic": {}}, "classifier": {"lr": 1}}"#)
                .is_err()
        );
    }

    #[test]
    fn method_sets_classifier_defaults() {
        let zd = synthetic().classifier_config();
        assert_eq!((zd.loss, zd.weight_decay), (ClassifierLoss::CrossEntropy, 1e-5));
        let mut ale = synthetic();
        ale.method = Method::Ale;
        ale.classifier.epochs = Some(30);
        let c = ale.classifier_config();
        assert_eq!((c.loss, c.weight_decay, c.epochs), (ClassifierLoss::Warp, 1e-4, 30));
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = synthetic();
        assert_eq!(a.fingerprint().unwrap(), a.clone().fingerprint().unwrap());
        assert_eq!(a.fingerprint().unwrap().len(), 64);
        let mut b = a.clone();
        b.root_seed = 1;
        assert_ne!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = synthetic();
        c.repetitions = 0;
        assert!(c.validate().unwrap_err().is_config());

        let c = ExperimentConfig::new(
            Method::Ale,
            DatasetSource::Files {
                features: "/nonexistent/f.jsonl".into(),
                classes: "/nonexistent/c.jsonl".into(),
                partition: PartitionSource::Builtin {
                    dataset: "esc50".into(),
                    name: "fold1".into(),
                },
            },
        );
        assert!(c.validate().unwrap_err().is_config());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        std::fs::write(
            &path,
            r#"{"dataset": {"files": {"features": "f.jsonl", "classes": "/abs/c.jsonl", "partition": {"file": "p.json"}}}}"#,
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        let DatasetSource::Files {
            features,
            classes,
            partition,
        } = cfg.dataset
        else {
            panic!("expected files source");
        };
        assert_eq!(features, dir.path().join("f.jsonl"));
        assert_eq!(classes, PathBuf::from("/abs/c.jsonl"));
        assert_eq!(partition, PartitionSource::File(dir.path().join("p.json")));
    }
}
