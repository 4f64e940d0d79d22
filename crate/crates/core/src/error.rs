use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("format error{}: {message}", record.as_ref().map(|r| format!(" in record `{r}`")).unwrap_or_default())]
    Format { record: Option<String>, message: String },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("batch size {actual} is too small, need at least {required}")]
    BatchSize { actual: usize, required: usize },

    #[error("no class embedding for class `{0}`")]
    MissingClass(String),

    #[error("unresolvable tokens: {}", .0.join(", "))]
    MissingTokens(Vec<String>),

    #[error("unknown dataset `{name}`; known datasets: {}", known.join(", "))]
    UnknownDataset { name: String, known: Vec<String> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("loss is not deterministic under a fixed seed ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("run with seed {seed} failed at {stage}: {message}")]
    Run {
        seed: u64,
        stage: String,
        message: String,
        numerical: bool,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(record: Option<&str>, message: impl Into<String>) -> Self {
        Error::Format {
            record: record.map(str::to_owned),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that originate in the optimisation itself rather than
    /// in configuration or input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } | Error::Run { numerical: true, .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownDataset { .. })
    }
}
