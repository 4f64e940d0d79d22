use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::run::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

/// `"0.3138 ± 0.0132"`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.4}")
}

pub fn render_text(report: &ExperimentReport) -> String {
    let mut out = format!(
        "{:?} on {} / {}: {}\n",
        report.method,
        report.dataset,
        report.partition,
        format_mean_std(report.mean, report.std)
    );
    out.push_str(&format!(
        "fingerprint {}\nstd {:?}, generation count {}\n",
        report.fingerprint, report.std_convention, report.generation_count
    ));
    for run in &report.runs {
        out.push_str(&format!(
            "  seed {:>4}  {:.4}  ({:.2}s)\n",
            run.seed, run.accuracy, run.wall_clock_secs
        ));
    }
    for f in &report.failures {
        out.push_str(&format!("  seed {:>4}  FAILED at {}: {}\n", f.seed, f.stage, f.message));
    }
    out
}

/// One header row plus one row per report.
pub fn render_markdown_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("| method | dataset | partition | runs | accuracy |\n|---|---|---|---|---|\n");
    for r in reports {
        out.push_str(&format!(
            "| {:?} | {} | {} | {} | {} |\n",
            r.method,
            r.dataset,
            r.partition,
            r.runs.len(),
            format_mean_std(r.mean, r.std)
        ));
    }
    out
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
        ReportFormat::Markdown => render_markdown_table(std::slice::from_ref(report)),
    })
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report, format)?).map_err(|e| Error::io(path, e))
}
