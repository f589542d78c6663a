use std::path::PathBuf;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig};
use crate::data::{
    gen_synthetic, load_idx, sample_auxiliary, shard_partition, AuxiliarySet, ClientDataset,
    Dataset, SyntheticSpec,
};
use crate::error::Result;
use crate::nn::MlpModel;
use crate::rng;
use crate::sim::{summarize, Algorithm, Experiment, RoundRecord, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
}

/// Everything an experiment needs before round 1.
pub struct Prepared {
    pub model: MlpModel,
    pub clients: Vec<ClientDataset>,
    pub test: Dataset,
    pub aux: Option<AuxiliarySet>,
}

/// Synthetic train and test sets sharing class means.
pub fn synthetic_split(source: &DataSource, seed: u64) -> Result<Option<(Dataset, Dataset)>> {
    let DataSource::Synthetic {
        counts,
        test_counts,
        dim,
        separation,
        scale,
        run_length,
    } = source
    else {
        return Ok(None);
    };
    let spec =
        SyntheticSpec::clustered(*dim, counts.clone(), *separation, *scale, *run_length, seed);
    let train = gen_synthetic(&spec, seed)?;
    let test = gen_synthetic(
        &spec.with_counts(test_counts.clone()),
        rng::derive_seed(seed, &[rng::TAG_TEST]),
    )?;
    Ok(Some((train, test)))
}

pub fn prepare(config: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let (train, test) = match &config.data {
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            num_classes,
        } => {
            let train = load_idx(train_images, train_labels, *num_classes)?;
            let test = load_idx(test_images, test_labels, Some(train.num_classes))?;
            (train, test)
        }
        synthetic => synthetic_split(synthetic, seed)?.expect("synthetic source"),
    };
    let clients = shard_partition(
        &train,
        config.fl.num_clients,
        config.shards_per_client,
        seed,
    )?;
    let aux = match (&config.aux_files, config.fl.algorithm) {
        (_, Algorithm::Baseline) => None,
        (Some((images, labels)), _) => Some(AuxiliarySet::from_dataset(&load_idx(
            images,
            labels,
            Some(train.num_classes),
        )?)?),
        (None, _) => Some(sample_auxiliary(&train, config.aux_per_class, seed)?),
    };
    let mut sizes = vec![train.feature_dim()];
    sizes.extend(&config.hidden_layers);
    sizes.push(train.num_classes);
    let model = MlpModel::init(&sizes, rng::derive_seed(seed, &[rng::TAG_INIT]))?;
    Ok(Prepared {
        model,
        clients,
        test,
        aux,
    })
}

pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    let prepared = prepare(config, seed)?;
    let experiment = Experiment::new(
        config.fl.clone(),
        prepared.model,
        prepared.clients,
        prepared.test,
        prepared.aux,
        seed,
    )?;
    let records = experiment.run()?;
    let summary = summarize(&records);
    info!(
        "seed {seed}: acc {:.4}, acc.M {:.4}, drops {}",
        summary.final_accuracy, summary.final_minority_accuracy, summary.drop_count
    );
    Ok(ExperimentReport {
        config: config.clone(),
        seed,
        records,
        summary,
    })
}

/// Seeds `seed, seed+1, ..., seed+repeats-1`, run in parallel when the
/// configured execution allows it.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let seeds: Vec<u64> = (0..config.repeats as u64)
        .map(|i| config.seed + i)
        .collect();
    config
        .fl
        .execution
        .map(&seeds, |&s| run_experiment(config, s))
        .into_iter()
        .collect()
}

/// `metrics.csv` → `metrics_seed7.csv`.
pub fn seed_path(path: &std::path::Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}_seed{seed}"),
    };
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::parse_config_str;
    use std::path::Path;

    fn small() -> ExperimentConfig {
        parse_config_str(
            "synthetic_counts = [120, 60, 30]\nsynthetic_dim = 4\nnum_clients = 6\nselection_rate = 0.5\nrounds = 3\nlocal_epochs = 1\nbatch_size = 8\nhidden_layers = [6]\nshards_per_client = 2",
            Path::new("/tmp"),
        )
        .unwrap()
    }

    #[test]
    fn report_has_round_zero_and_summary() {
        let report = run_experiment(&small(), 3).unwrap();
        assert_eq!(report.records.len(), 4);
        assert_eq!(report.records[0].round, 0);
        assert_eq!(report.summary, summarize(&report.records));
    }

    #[test]
    fn sweep_matches_single_runs() {
        let mut cfg = small();
        cfg.repeats = 2;
        cfg.seed = 10;
        let reports = sweep(&cfg).unwrap();
        assert_eq!(reports[1], run_experiment(&cfg, 11).unwrap());
    }

    #[test]
    fn seed_path_inserts_suffix() {
        assert_eq!(
            seed_path(Path::new("/a/m.csv"), 7),
            Path::new("/a/m_seed7.csv")
        );
        assert_eq!(seed_path(Path::new("out"), 1), Path::new("out_seed1"));
    }
}
