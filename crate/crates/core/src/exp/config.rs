//! Experiment configuration: a flat TOML file with a fixed set of keys.
//!
//! | key | default |
//! |-----|---------|
//! | `seed` | 0 |
//! | `repeats` | 1 (seeds used by `sweep`) |
//! | `rounds` | 50 |
//! | `num_clients` | 50 |
//! | `selection_rate` | 0.3 |
//! | `local_epochs` | 5 |
//! | `batch_size` | 32 |
//! | `lr` | 0.001, or 0.002 when `n_latest` is set |
//! | `momentum` | 0.9 (0 for `estimate-only`) |
//! | `strategy` | `"fedavg"` (`"fedprox"`, `"fednova"`) |
//! | `prox_mu` | 0.01 |
//! | `algorithm` | `"fedimt"` (`"baseline"`) |
//! | `baseline_loss` | `"ce"` (`"focal"`) |
//! | `focal_gamma` | 2.0 |
//! | `n_latest` | unset (train on all data) |
//! | `window_advance` | unset (sweep the stream once per run) |
//! | `drop_threshold` | 0.5 |
//! | `beta` | 0.999 |
//! | `dynamic_gain` | false |
//! | `denom_epsilon`, `confidence_floor`, `scale_cal` | 1e-6, 0, 1 |
//! | `execution` | `"parallel"` (`"sequential"`) |
//! | `hidden_layers` | `[32]` |
//! | `shards_per_client` | 3 |
//! | `aux_per_class` | 4 × `batch_size` |
//! | `csv_path`, `json_path` | `metrics.csv`, `report.json` |
//!
//! Data comes from exactly one source. Synthetic: `synthetic_counts`
//! (required), `synthetic_test_counts` (default counts / 5),
//! `synthetic_dim` (16), `synthetic_separation` (4.0), `synthetic_scale`
//! (1.0), `synthetic_run_length` (1.0). IDX: `train_images`,
//! `train_labels`, `test_images`, `test_labels`, optionally `num_classes`.
//! Optional `aux_images`/`aux_labels` replace the sampled auxiliary set.
//! Relative paths are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::parallel::Execution;
use crate::sim::{Algorithm, BaselineLoss, FlConfig, Strategy};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    repeats: Option<usize>,
    rounds: Option<usize>,
    num_clients: Option<usize>,
    selection_rate: Option<f64>,
    local_epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    momentum: Option<f64>,
    strategy: Option<Strategy>,
    prox_mu: Option<f64>,
    algorithm: Option<Algorithm>,
    baseline_loss: Option<BaselineLoss>,
    focal_gamma: Option<f64>,
    n_latest: Option<usize>,
    window_advance: Option<usize>,
    drop_threshold: Option<f64>,
    beta: Option<f64>,
    dynamic_gain: Option<bool>,
    denom_epsilon: Option<f64>,
    confidence_floor: Option<f64>,
    scale_cal: Option<f64>,
    execution: Option<Execution>,
    hidden_layers: Option<Vec<usize>>,
    shards_per_client: Option<usize>,
    aux_per_class: Option<usize>,
    csv_path: Option<PathBuf>,
    json_path: Option<PathBuf>,

    synthetic_counts: Option<Vec<usize>>,
    synthetic_test_counts: Option<Vec<usize>>,
    synthetic_dim: Option<usize>,
    synthetic_separation: Option<f64>,
    synthetic_scale: Option<f64>,
    synthetic_run_length: Option<f64>,

    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
    num_classes: Option<usize>,

    aux_images: Option<PathBuf>,
    aux_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        counts: Vec<usize>,
        test_counts: Vec<usize>,
        dim: usize,
        separation: f64,
        scale: f64,
        run_length: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        num_classes: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub fl: FlConfig,
    pub data: DataSource,
    /// External auxiliary set `(images, labels)`.
    pub aux_files: Option<(PathBuf, PathBuf)>,
    pub hidden_layers: Vec<usize>,
    pub shards_per_client: usize,
    pub aux_per_class: usize,
    pub seed: u64,
    pub repeats: usize,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    /// Whether `momentum` was given explicitly.
    pub momentum_set: bool,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
    let must_exist = |p: PathBuf| -> Result<PathBuf> {
        let p = resolve(p);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Config(format!(
                "referenced file {} does not exist",
                p.display()
            )))
        }
    };

    let defaults = FlConfig::default();
    let lr = raw.lr.unwrap_or(if raw.n_latest.is_some() {
        0.002
    } else {
        defaults.lr
    });
    let fl = FlConfig {
        num_clients: raw.num_clients.unwrap_or(defaults.num_clients),
        selection_rate: raw.selection_rate.unwrap_or(defaults.selection_rate),
        local_epochs: raw.local_epochs.unwrap_or(defaults.local_epochs),
        batch_size: raw.batch_size.unwrap_or(defaults.batch_size),
        lr,
        momentum: raw.momentum.unwrap_or(defaults.momentum),
        rounds: raw.rounds.unwrap_or(defaults.rounds),
        strategy: raw.strategy.unwrap_or(defaults.strategy),
        prox_mu: raw.prox_mu.unwrap_or(defaults.prox_mu),
        algorithm: raw.algorithm.unwrap_or(defaults.algorithm),
        baseline_loss: raw.baseline_loss.unwrap_or(defaults.baseline_loss),
        focal_gamma: raw.focal_gamma.unwrap_or(defaults.focal_gamma),
        n_latest: raw.n_latest,
        window_advance: raw.window_advance,
        drop_threshold: raw.drop_threshold.unwrap_or(defaults.drop_threshold),
        beta: raw.beta.unwrap_or(defaults.beta),
        dynamic_gain: raw.dynamic_gain.unwrap_or(defaults.dynamic_gain),
        estimator: EstimatorParams {
            denom_epsilon: raw
                .denom_epsilon
                .unwrap_or(defaults.estimator.denom_epsilon),
            confidence_floor: raw
                .confidence_floor
                .unwrap_or(defaults.estimator.confidence_floor),
            scale_cal: raw.scale_cal.unwrap_or(defaults.estimator.scale_cal),
        },
        execution: raw.execution.unwrap_or(defaults.execution),
    };
    fl.validate().map_err(|e| Error::Config(e.to_string()))?;

    let synthetic = raw.synthetic_counts.is_some();
    let idx = raw.train_images.is_some() || raw.train_labels.is_some();
    let data = match (synthetic, idx) {
        (true, true) => {
            return Err(Error::Config(
                "both synthetic_counts and IDX files given; pick one data source".into(),
            ))
        }
        (false, false) => {
            return Err(Error::Config(
                "no data source: set synthetic_counts or train_images/train_labels".into(),
            ))
        }
        (true, false) => {
            let counts = raw.synthetic_counts.unwrap();
            if counts.len() < 2 {
                return Err(Error::Config(
                    "synthetic_counts needs at least two classes".into(),
                ));
            }
            let test_counts = raw
                .synthetic_test_counts
                .unwrap_or_else(|| counts.iter().map(|c| (c / 5).max(1)).collect());
            if test_counts.len() != counts.len() {
                return Err(Error::Config(
                    "synthetic_test_counts and synthetic_counts differ in length".into(),
                ));
            }
            DataSource::Synthetic {
                counts,
                test_counts,
                dim: raw.synthetic_dim.unwrap_or(16),
                separation: raw.synthetic_separation.unwrap_or(4.0),
                scale: raw.synthetic_scale.unwrap_or(1.0),
                run_length: raw.synthetic_run_length.unwrap_or(1.0),
            }
        }
        (false, true) => {
            let need = |v: Option<PathBuf>, key: &str| {
                v.ok_or_else(|| Error::Config(format!("IDX data source needs `{key}`")))
                    .and_then(must_exist)
            };
            DataSource::Idx {
                train_images: need(raw.train_images, "train_images")?,
                train_labels: need(raw.train_labels, "train_labels")?,
                test_images: need(raw.test_images, "test_images")?,
                test_labels: need(raw.test_labels, "test_labels")?,
                num_classes: raw.num_classes,
            }
        }
    };
    let aux_files = match (raw.aux_images, raw.aux_labels) {
        (Some(i), Some(l)) => Some((must_exist(i)?, must_exist(l)?)),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "aux_images and aux_labels must be given together".into(),
            ))
        }
    };
    let hidden_layers = raw.hidden_layers.unwrap_or_else(|| vec![32]);
    if hidden_layers.contains(&0) {
        return Err(Error::Config("hidden_layers entries must be >= 1".into()));
    }
    let repeats = raw.repeats.unwrap_or(1);
    let shards_per_client = raw.shards_per_client.unwrap_or(3);
    let aux_per_class = raw
        .aux_per_class
        .unwrap_or(crate::data::DEFAULT_AUX_BATCHES * fl.batch_size);
    if repeats == 0 || shards_per_client == 0 || aux_per_class == 0 {
        return Err(Error::Config(
            "repeats, shards_per_client and aux_per_class must be >= 1".into(),
        ));
    }
    Ok(ExperimentConfig {
        momentum_set: raw.momentum.is_some(),
        fl,
        data,
        aux_files,
        hidden_layers,
        shards_per_client,
        aux_per_class,
        seed: raw.seed.unwrap_or(0),
        repeats,
        csv_path: resolve(raw.csv_path.unwrap_or_else(|| "metrics.csv".into())),
        json_path: resolve(raw.json_path.unwrap_or_else(|| "report.json".into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config_str(text, Path::new("/tmp"))
    }

    #[test]
    fn defaults() {
        let c = parse("synthetic_counts = [100, 100]").unwrap();
        assert_eq!(c.fl.batch_size, 32);
        assert_eq!(c.fl.lr, 0.001);
        assert_eq!(c.fl.momentum, 0.9);
        assert_eq!(c.fl.selection_rate, 0.3);
        assert_eq!(c.fl.local_epochs, 5);
        assert_eq!(c.fl.beta, 0.999);
        assert_eq!(c.fl.drop_threshold, 0.5);
        assert_eq!(c.fl.rounds, 50);
        assert_eq!(c.aux_per_class, 128);
        assert!(!c.momentum_set);
        assert_eq!(c.csv_path, Path::new("/tmp/metrics.csv"));
    }

    #[test]
    fn n_latest_switches_default_lr() {
        let c = parse("synthetic_counts = [10, 10]\nn_latest = 5").unwrap();
        assert_eq!(c.fl.lr, 0.002);
        let c = parse("synthetic_counts = [10, 10]\nn_latest = 5\nlr = 0.01").unwrap();
        assert_eq!(c.fl.lr, 0.01);
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let err = parse("synthetic_counts = [1, 1]\nlearning_rat = 0.1")
            .unwrap_err()
            .to_string();
        assert!(err.contains("learning_rat"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn type_mismatch_and_missing_source() {
        assert!(parse("synthetic_counts = [1, 1]\nrounds = \"many\"").is_err());
        let err = parse("rounds = 3").unwrap_err().to_string();
        assert!(err.contains("data source"), "{err}");
        assert!(parse("synthetic_counts = [1, 1]\ntrain_images = \"x\"").is_err());
    }

    #[test]
    fn idx_files_must_exist() {
        let err = parse(
            "train_images = \"nope\"\ntrain_labels = \"nope\"\ntest_images = \"nope\"\ntest_labels = \"nope\"",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("does not exist"), "{err}");
    }

    #[test]
    fn enums_parse() {
        let c = parse(
            "synthetic_counts = [1, 1]\nstrategy = \"fednova\"\nalgorithm = \"baseline\"\nbaseline_loss = \"focal\"\nexecution = \"sequential\"",
        )
        .unwrap();
        assert_eq!(c.fl.strategy, Strategy::FedNova);
        assert_eq!(c.fl.algorithm, Algorithm::Baseline);
        assert_eq!(c.fl.baseline_loss, BaselineLoss::Focal);
        assert_eq!(c.fl.execution, Execution::Sequential);
    }
}
