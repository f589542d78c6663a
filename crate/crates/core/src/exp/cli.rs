use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use super::config::{parse_config, DataSource, ExperimentConfig};
use super::metrics::write_metrics;
use super::run::{run_experiment, seed_path, sweep, synthetic_split, ExperimentReport};
use crate::data::{quantize_jointly, write_idx};
use crate::error::{Error, Result};
use crate::sim::{Algorithm, Summary};

#[derive(Debug, Parser)]
#[command(
    name = "fedimt",
    version,
    about = "Imbalance-aware federated learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its CSV/JSON metrics.
    Run(RunArgs),
    /// Run `repeats` seeds and write per-seed files plus an aggregate.
    Sweep(RunArgs),
    /// Ratio-estimation run: FedImT, momentum 0 unless the config sets it.
    EstimateOnly(RunArgs),
    /// Write the configured synthetic dataset as IDX files.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SweepAggregate {
    seeds: Vec<u64>,
    summaries: Vec<Summary>,
    mean_final_accuracy: f64,
    mean_final_minority_accuracy: f64,
    mean_t_j: Option<f64>,
    mean_t_g: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn aggregate(reports: &[ExperimentReport]) -> SweepAggregate {
    let pick = |f: fn(&Summary) -> Option<f64>| -> Vec<f64> {
        reports.iter().filter_map(|r| f(&r.summary)).collect()
    };
    SweepAggregate {
        seeds: reports.iter().map(|r| r.seed).collect(),
        summaries: reports.iter().map(|r| r.summary.clone()).collect(),
        mean_final_accuracy: mean(&pick(|s| Some(s.final_accuracy))).unwrap_or(0.0),
        mean_final_minority_accuracy: mean(&pick(|s| Some(s.final_minority_accuracy)))
            .unwrap_or(0.0),
        mean_t_j: mean(&pick(|s| s.mean_t_j)),
        mean_t_g: mean(&pick(|s| s.mean_t_g)),
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load(args: &RunArgs) -> std::result::Result<ExperimentConfig, Failure> {
    if !args.config.is_file() {
        return Err(Failure::Usage(format!(
            "config file {} not found",
            args.config.display()
        )));
    }
    let mut config = parse_config(&args.config).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(csv) = &args.csv {
        config.csv_path = csv.clone();
    }
    if let Some(json) = &args.json {
        config.json_path = json.clone();
    }
    Ok(config)
}

fn run_one(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = run_experiment(config, config.seed)?;
    write_metrics(&report, &config.csv_path, &config.json_path)?;
    Ok(report)
}

fn print_summary(report: &ExperimentReport) {
    let s = &report.summary;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
    println!(
        "seed {}: acc {:.4} acc_minority {:.4} mean_T_j {} mean_T_G {} drops {}",
        report.seed,
        s.final_accuracy,
        s.final_minority_accuracy,
        fmt(s.mean_t_j),
        fmt(s.mean_t_g),
        s.drop_count
    );
}

fn gen_data(config: &Path, out: &Path, seed: Option<u64>) -> std::result::Result<(), Failure> {
    if !config.is_file() {
        return Err(Failure::Usage(format!(
            "config file {} not found",
            config.display()
        )));
    }
    let cfg = parse_config(config).map_err(|e| Failure::Usage(e.to_string()))?;
    if !matches!(cfg.data, DataSource::Synthetic { .. }) {
        return Err(Failure::Usage(
            "gen-data needs a synthetic data source".into(),
        ));
    }
    let (train, test) =
        synthetic_split(&cfg.data, seed.unwrap_or(cfg.seed))?.expect("synthetic source");
    let sets = quantize_jointly(&[train, test]);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_idx(
        &sets[0],
        &out.join("train-images.idx3-ubyte"),
        &out.join("train-labels.idx1-ubyte"),
    )?;
    write_idx(
        &sets[1],
        &out.join("test-images.idx3-ubyte"),
        &out.join("test-labels.idx1-ubyte"),
    )?;
    println!(
        "wrote {} train and {} test samples to {}",
        sets[0].len(),
        sets[1].len(),
        out.display()
    );
    Ok(())
}

fn dispatch(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Run(args) => print_summary(&run_one(&load(&args)?)?),
        Command::EstimateOnly(args) => {
            let mut config = load(&args)?;
            config.fl.algorithm = Algorithm::FedImT;
            if !config.momentum_set {
                config.fl.momentum = 0.0;
            }
            print_summary(&run_one(&config)?);
        }
        Command::Sweep(args) => {
            let config = load(&args)?;
            let reports = sweep(&config)?;
            for report in &reports {
                write_metrics(
                    report,
                    &seed_path(&config.csv_path, report.seed),
                    &seed_path(&config.json_path, report.seed),
                )?;
                print_summary(report);
            }
            let stem = config
                .json_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let path = config
                .json_path
                .with_file_name(format!("{stem}_aggregate.json"));
            let mut text =
                serde_json::to_string_pretty(&aggregate(&reports)).map_err(Error::from)?;
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Command::GenData { config, out, seed } => gen_data(&config, &out, seed)?,
    }
    Ok(())
}

/// Entry point for the binary. Returns 0 on success, 2 for usage and
/// configuration errors, 1 for failures during the run.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
