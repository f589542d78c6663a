//! Experiment front end: configuration, evaluation, metrics files and the
//! command-line interface.

mod cli;
mod config;
mod eval;
mod metrics;
mod run;

pub use cli::cli_main;
pub use config::{parse_config, parse_config_str, DataSource, ExperimentConfig};
pub use eval::{evaluate, evaluate_predictions, minority_classes, Evaluation};
pub use metrics::{format_sig9, metrics_csv, read_report, write_metrics};
pub use run::{
    prepare, run_experiment, seed_path, sweep, synthetic_split, ExperimentReport, Prepared,
};
