//! Multi-seed experiment runner: resolve a dataset and partition, repeat the
//! pipeline per seed, aggregate, report.

pub mod config;
pub mod report;
pub mod run;
pub mod selfcheck;

pub use config::{
    load_dataset, ClassifierOverrides, DatasetSource, ExperimentConfig, LoadedDataset, Method, PartitionSource,
    StdConvention,
};
pub use report::{emit_report, format_mean_std, render_markdown_table, render_report, render_text, ReportFormat};
pub use run::{aggregate, run_experiment, run_seed, ExperimentReport, RunFailure, RunRecord, Stage};
pub use selfcheck::{run_self_checks, CheckResult};
