use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zerodiffusion::embedding_io::{
    builtin_partitions, known_datasets, synth_benchmark, write_class_table, write_feature_table, write_partition,
    SynthConfig,
};
use zerodiffusion::harness::{
    emit_report, render_text, run_experiment, run_self_checks, DatasetSource, ExperimentConfig, Method, ReportFormat,
};
use zerodiffusion::Error;

#[derive(Parser)]
#[command(
    name = "zerodiffusion",
    version,
    about = "Zero-shot classification with embedding-space diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-seed experiment and write a report.
    Run {
        /// Experiment config (JSON). Without one, the default synthetic benchmark is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        /// Root seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
    },
    /// Write a synthetic benchmark as features.jsonl, classes.jsonl and partition.json.
    Synth {
        /// Synthetic benchmark settings (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run gradient and invariant self-tests.
    Check,
    /// Print the built-in partition tables.
    Partitions {
        /// Restrict to one dataset.
        dataset: Option<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_numerical() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run {
            config,
            method,
            seed,
            reps,
            out,
            format,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::new(Method::Zerodiffusion, DatasetSource::Synthetic(SynthConfig::default())),
            };
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            if let Some(r) = reps {
                cfg.repetitions = r;
            }
            let report = run_experiment(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let path = out.join(format!("report.{}", format.extension()));
            emit_report(&report, format, &path)?;
            print!("{}", render_text(&report));
            eprintln!("report written to {}", path.display());
            Ok(match report.failures.first() {
                None => 0,
                Some(f) if f.numerical => 4,
                Some(_) => 3,
            })
        }
        Command::Synth { config, seed, out } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let bench = synth_benchmark(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            write_feature_table(out.join("features.jsonl"), &bench.features)?;
            write_class_table(out.join("classes.jsonl"), &bench.classes)?;
            write_partition(out.join("partition.json"), &bench.partition)?;
            println!(
                "wrote {} records, {} classes to {}",
                bench.features.len(),
                bench.classes.len(),
                out.display()
            );
            Ok(0)
        }
        Command::Check => {
            let mut all = true;
            for c in run_self_checks()? {
                println!(
                    "{} {} = {:.3e} (threshold {:.0e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
                all &= c.passed;
            }
            Ok(if all { 0 } else { 4 })
        }
        Command::Partitions { dataset } => {
            let names = match dataset {
                Some(d) => vec![d],
                None => known_datasets(),
            };
            for name in names {
                println!("{name}");
                for p in builtin_partitions(&name)? {
                    println!(
                        "  {} ({} seen / {} unseen)",
                        p.name,
                        p.seen_classes.len(),
                        p.unseen_classes.len()
                    );
                    println!("    unseen: {}", p.unseen_classes.join(", "));
                }
            }
            Ok(0)
        }
    }
}
