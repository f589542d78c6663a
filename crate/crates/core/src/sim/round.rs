use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::aggregate::aggregate;
use super::client::{local_update, select_clients, ClientUpdate};
use super::config::{Algorithm, FlConfig, Strategy};
use crate::data::{window_latest, AuxiliarySet, ClientDataset, Dataset, TrainingSlice};
use crate::error::{Error, Result};
use crate::estimator::{
    counts_to_ratio, estimate_counts, momentum_amplification, oracle_counts, probe_auxiliary,
};
use crate::exp::{evaluate, minority_classes};
use crate::nn::{LossSpec, MlpModel};
use crate::observer::{cosine_similarity, RatioObserverState};

/// Everything measured in one global round. Round 0 is the evaluation of
/// the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: Vec<usize>,
    /// Selected clients that returned an update.
    pub participants: Vec<usize>,
    pub estimated_counts: Option<Vec<f64>>,
    /// Simulator ground truth over the participants' training rows.
    pub true_counts: Vec<f64>,
    pub round_ratio: Option<Vec<f64>>,
    pub observer_ratio: Option<Vec<f64>>,
    /// Cosine between the round estimate and the observer before update.
    pub similarity: Option<f64>,
    pub t_j: Option<f64>,
    pub t_g: Option<f64>,
    pub dropped: bool,
    pub fallback_classes: usize,
    pub accuracy: f64,
    pub minority_accuracy: f64,
    pub train_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_accuracy: f64,
    pub final_minority_accuracy: f64,
    pub mean_t_j: Option<f64>,
    pub mean_t_g: Option<f64>,
    pub drop_count: usize,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(records: &[RoundRecord]) -> Summary {
    let last = records.last();
    Summary {
        final_accuracy: last.map_or(0.0, |r| r.accuracy),
        final_minority_accuracy: last.map_or(0.0, |r| r.minority_accuracy),
        mean_t_j: mean_of(records.iter().filter_map(|r| r.t_j)),
        mean_t_g: mean_of(records.iter().filter_map(|r| r.t_g)),
        drop_count: records.iter().filter(|r| r.dropped).count(),
    }
}

/// Server plus simulated clients. The server side only ever reads client
/// updates (weights, sample counts, step counts) and its auxiliary set;
/// client data is touched by `local_update` and by the ground-truth
/// bookkeeping that feeds the metrics.
pub struct Experiment {
    config: FlConfig,
    clients: Vec<ClientDataset>,
    test: Dataset,
    aux: Option<AuxiliarySet>,
    global: MlpModel,
    observer: Option<RatioObserverState>,
    loss: LossSpec,
    minority: Vec<bool>,
    round: usize,
    seed: u64,
}

impl Experiment {
    pub fn new(
        config: FlConfig,
        initial_model: MlpModel,
        clients: Vec<ClientDataset>,
        test: Dataset,
        aux: Option<AuxiliarySet>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if clients.len() != config.num_clients {
            return Err(Error::InvalidArgument(format!(
                "config expects {} clients, got {}",
                config.num_clients,
                clients.len()
            )));
        }
        let q = initial_model.num_classes();
        if test.is_empty() {
            return Err(Error::InvalidArgument("empty test set".into()));
        }
        if test.num_classes != q || clients.iter().any(|c| c.dataset.num_classes != q) {
            return Err(Error::Shape(format!(
                "model has {q} outputs but data disagrees"
            )));
        }
        if test.feature_dim() != initial_model.input_width() {
            return Err(Error::Shape(
                "test features do not match the model input".into(),
            ));
        }
        let (observer, loss) = match config.algorithm {
            Algorithm::Baseline => (None, config.baseline_loss_spec()),
            Algorithm::FedImT => {
                let aux = aux.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("FedImT needs an auxiliary set".into())
                })?;
                if aux.num_classes() != q {
                    return Err(Error::Shape(
                        "auxiliary set does not cover every class".into(),
                    ));
                }
                // Uniform ratio: every class weight is one.
                (
                    Some(RatioObserverState::new(
                        q,
                        config.selection_rate,
                        config.drop_threshold,
                    )?),
                    LossSpec::PlainCe,
                )
            }
        };
        let mut train_counts = vec![0usize; q];
        for c in &clients {
            for (t, n) in train_counts.iter_mut().zip(c.dataset.class_counts()) {
                *t += n;
            }
        }
        let minority = minority_classes(&train_counts);
        Ok(Experiment {
            config,
            clients,
            test,
            aux,
            global: initial_model,
            observer,
            loss,
            minority,
            round: 0,
            seed,
        })
    }

    pub fn global_model(&self) -> &MlpModel {
        &self.global
    }

    pub fn observer(&self) -> Option<&RatioObserverState> {
        self.observer.as_ref()
    }

    pub fn loss_spec(&self) -> &LossSpec {
        &self.loss
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn config(&self) -> &FlConfig {
        &self.config
    }

    fn slice(&self, client: &ClientDataset, round: usize) -> Result<TrainingSlice> {
        match self.config.n_latest {
            None => Ok(TrainingSlice::whole(client)),
            Some(n) => {
                let advance = self.config.window_advance.unwrap_or_else(|| {
                    let spare = client.total_count().saturating_sub(n);
                    spare
                        .div_ceil(self.config.rounds.saturating_sub(1).max(1))
                        .max(1)
                });
                window_latest(client, n, advance, round)
            }
        }
    }

    /// Class composition of every client's in-scope rows this round.
    fn global_truth(&self, round: usize) -> Result<Vec<f64>> {
        let slices = self
            .clients
            .iter()
            .map(|c| self.slice(c, round))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<_> = self.clients.iter().zip(&slices).collect();
        Ok(oracle_counts(&pairs, self.global.num_classes()))
    }

    /// Evaluation of the current global model as a round-0 record.
    pub fn initial_record(&self) -> Result<RoundRecord> {
        let eval = evaluate(&self.global, &self.test, &self.minority)?;
        Ok(RoundRecord {
            round: 0,
            selected: Vec::new(),
            participants: Vec::new(),
            estimated_counts: None,
            true_counts: Vec::new(),
            round_ratio: None,
            observer_ratio: self.observer.as_ref().map(|o| o.ratio.clone()),
            similarity: None,
            t_j: None,
            t_g: None,
            dropped: false,
            fallback_classes: 0,
            accuracy: eval.accuracy,
            minority_accuracy: eval.minority_accuracy,
            train_loss: None,
        })
    }

    pub fn run_round(&mut self) -> Result<RoundRecord> {
        self.run_round_inner(None)
    }

    /// Runs a round but replaces the estimated round ratio with `ratio`.
    /// Used to exercise the drop path.
    pub fn run_round_with_injected_ratio(&mut self, ratio: &[f64]) -> Result<RoundRecord> {
        self.run_round_inner(Some(ratio))
    }

    /// Probe step factor so that `K·ΔW ≈ Σ_q a_q N_q` holds for the
    /// aggregation actually performed this round.
    fn probe_step_factor(&self, updates: &[ClientUpdate], total: f64) -> f64 {
        let n: f64 = updates.iter().map(|u| u.sample_count as f64).sum();
        let k = updates.len() as f64;
        let mu = self.config.momentum;
        let tau_eff: f64 = updates
            .iter()
            .map(|u| u.sample_count as f64 / n * u.local_steps as f64)
            .sum();
        let effective_steps: f64 = updates
            .iter()
            .map(|u| {
                let amp = momentum_amplification(mu, u.local_steps);
                let steps = match self.config.strategy {
                    Strategy::FedNova => tau_eff,
                    _ => u.local_steps as f64,
                };
                u.sample_count as f64 / n * steps * amp
            })
            .sum();
        self.config.lr * k * effective_steps / total * self.config.estimator.scale_cal
    }

    fn run_round_inner(&mut self, injected: Option<&[f64]>) -> Result<RoundRecord> {
        let round = self.round + 1;
        let cfg = &self.config;
        let selected = select_clients(cfg.num_clients, cfg.selection_rate, round, self.seed)?;
        let slices: Vec<TrainingSlice> = selected
            .iter()
            .map(|&id| self.slice(&self.clients[id], round))
            .collect::<Result<_>>()?;

        let jobs: Vec<(usize, &TrainingSlice)> = selected.iter().copied().zip(&slices).collect();
        let results = cfg.execution.map(&jobs, |&(id, slice)| {
            local_update(
                &self.clients[id],
                slice,
                &self.global,
                cfg,
                &self.loss,
                round,
                self.seed,
            )
        });
        let mut updates = Vec::with_capacity(results.len());
        let mut in_scope = Vec::new();
        for ((id, slice), result) in jobs.iter().zip(results) {
            match result? {
                Some(u) => {
                    updates.push(u);
                    in_scope.push((&self.clients[*id], *slice));
                }
                None => warn!("round {round}: client {id} has no training data, skipped"),
            }
        }
        let participants: Vec<usize> = updates.iter().map(|u| u.client_id).collect();
        let q = self.global.num_classes();
        let true_counts = oracle_counts(&in_scope, q);

        let mut record = RoundRecord {
            round,
            selected: selected.clone(),
            participants,
            estimated_counts: None,
            true_counts: true_counts.clone(),
            round_ratio: None,
            observer_ratio: None,
            similarity: None,
            t_j: None,
            t_g: None,
            dropped: false,
            fallback_classes: 0,
            accuracy: 0.0,
            minority_accuracy: 0.0,
            train_loss: None,
        };

        if !updates.is_empty() {
            let n: f64 = updates.iter().map(|u| u.sample_count as f64).sum();
            record.train_loss = Some(
                updates
                    .iter()
                    .map(|u| u.sample_count as f64 / n * u.mean_loss)
                    .sum(),
            );
            let candidate = aggregate(&updates, &self.global, cfg.strategy)?;

            if cfg.algorithm == Algorithm::FedImT {
                let k = updates.len();
                // Without disclosure every client is assumed to hold a full window.
                let total = match cfg.n_latest {
                    Some(n_latest) => (k * n_latest) as f64,
                    None => n,
                };
                let aux = self.aux.as_ref().expect("checked at construction");
                let factor = self.probe_step_factor(&updates, total);
                let probes = probe_auxiliary(&self.global, aux, &self.loss, factor, cfg.execution)?;
                let estimate = estimate_counts(
                    &probes,
                    self.global.last_layer(),
                    candidate.last_layer(),
                    total,
                    k,
                    &cfg.estimator,
                )?;
                record.fallback_classes = estimate.fallback.iter().filter(|&&f| f).count();
                let (mut ratio, degenerate) = counts_to_ratio(&estimate.counts)?;
                if degenerate {
                    warn!("round {round}: all estimated counts are zero, using the uniform ratio");
                }
                if let Some(r) = injected {
                    ratio = r.to_vec();
                }
                let observer = self.observer.as_mut().expect("FedImT has an observer");
                let decision = observer.mismatch_check(&ratio)?;
                if decision.dropped {
                    debug!(
                        "round {round}: dropped update, similarity {:.3}",
                        decision.similarity
                    );
                } else {
                    self.global = candidate;
                }
                let gain = if cfg.dynamic_gain {
                    k as f64 / cfg.num_clients as f64
                } else {
                    observer.gain
                };
                observer.update_with_gain(&ratio, gain)?;
                let n_ref = match cfg.n_latest {
                    Some(n_latest) => (k * n_latest) as f64,
                    None => n,
                };
                self.loss = observer.loss_spec(n_ref.max(q as f64), cfg.beta)?;

                record.similarity = Some(decision.similarity);
                record.dropped = decision.dropped;
                if true_counts.iter().any(|&c| c > 0.0) {
                    record.t_j = Some(cosine_similarity(&ratio, &true_counts)?);
                }
                let observer_ratio = observer.ratio.clone();
                let global_truth = self.global_truth(round)?;
                record.t_g = Some(cosine_similarity(&observer_ratio, &global_truth)?);
                record.estimated_counts = Some(estimate.counts);
                record.round_ratio = Some(ratio);
                record.observer_ratio = Some(observer_ratio);
            } else {
                self.global = candidate;
            }
        }

        let eval = evaluate(&self.global, &self.test, &self.minority)?;
        record.accuracy = eval.accuracy;
        record.minority_accuracy = eval.minority_accuracy;
        self.round = round;
        Ok(record)
    }

    /// Round 0 plus `config.rounds` rounds.
    pub fn run(mut self) -> Result<Vec<RoundRecord>> {
        let mut records = vec![self.initial_record()?];
        for _ in 0..self.config.rounds {
            records.push(self.run_round()?);
        }
        Ok(records)
    }
}
