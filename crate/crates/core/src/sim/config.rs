use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::nn::{LossSpec, DEFAULT_BETA, DEFAULT_GAMMA};
use crate::observer::DEFAULT_DROP_THRESHOLD;
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    FedAvg,
    FedProx,
    FedNova,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Clients train with `baseline_loss`; no estimation.
    Baseline,
    /// Ratio estimation, observation, and class-balanced re-weighting.
    FedImT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineLoss {
    Ce,
    Focal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlConfig {
    pub num_clients: usize,
    pub selection_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub rounds: usize,
    pub strategy: Strategy,
    pub prox_mu: f64,
    pub algorithm: Algorithm,
    pub baseline_loss: BaselineLoss,
    pub focal_gamma: f64,
    /// Train on the latest `n_latest` arrivals only.
    pub n_latest: Option<usize>,
    /// Window advance per round; `None` sweeps each client's stream once
    /// over the run.
    pub window_advance: Option<usize>,
    pub drop_threshold: f64,
    pub beta: f64,
    /// Observer gain from the round's actual participation instead of the
    /// configured selection rate.
    pub dynamic_gain: bool,
    pub estimator: EstimatorParams,
    pub execution: Execution,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            num_clients: 50,
            selection_rate: 0.3,
            local_epochs: 5,
            batch_size: 32,
            lr: 0.001,
            momentum: 0.9,
            rounds: 50,
            strategy: Strategy::FedAvg,
            prox_mu: 0.01,
            algorithm: Algorithm::FedImT,
            baseline_loss: BaselineLoss::Ce,
            focal_gamma: DEFAULT_GAMMA,
            n_latest: None,
            window_advance: None,
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            beta: DEFAULT_BETA,
            dynamic_gain: false,
            estimator: EstimatorParams::default(),
            execution: Execution::default(),
        }
    }
}

impl FlConfig {
    pub fn clients_per_round(&self) -> usize {
        (self.selection_rate * self.num_clients as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.num_clients == 0 {
            return bad("num_clients must be >= 1".into());
        }
        if !(self.selection_rate > 0.0 && self.selection_rate <= 1.0) {
            return bad(format!(
                "selection_rate {} not in (0, 1]",
                self.selection_rate
            ));
        }
        if self.clients_per_round() == 0 {
            return bad("selection_rate selects no clients".into());
        }
        if self.local_epochs == 0 || self.batch_size == 0 {
            return bad("local_epochs and batch_size must be >= 1".into());
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("lr {} must be >= 0", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} not in [0, 1)", self.momentum));
        }
        if !(self.prox_mu >= 0.0) {
            return bad(format!("prox_mu {} must be >= 0", self.prox_mu));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta {} not in [0, 1)", self.beta));
        }
        if !(-1.0..=1.0).contains(&self.drop_threshold) {
            return bad(format!(
                "drop_threshold {} not in [-1, 1]",
                self.drop_threshold
            ));
        }
        if !(self.focal_gamma >= 0.0) {
            return bad(format!("focal_gamma {} must be >= 0", self.focal_gamma));
        }
        if self.n_latest == Some(0) {
            return bad("n_latest must be >= 1".into());
        }
        if self.window_advance == Some(0) {
            return bad("window_advance must be >= 1".into());
        }
        self.estimator.validate()
    }

    /// Loss used by baseline runs.
    pub fn baseline_loss_spec(&self) -> LossSpec {
        match self.baseline_loss {
            BaselineLoss::Ce => LossSpec::PlainCe,
            BaselineLoss::Focal => LossSpec::Focal {
                gamma: self.focal_gamma,
            },
        }
    }
}
