//! Per-round class-composition estimation from last-layer weight updates.
//!
//! The server feeds the auxiliary samples of each class through the previous
//! global model and records the resulting last-layer update `ΔW_aux^(q)`.
//! For output node `p` and hidden node `m`, the aggregated round update then
//! satisfies, to first order,
//!
//! ```text
//! a_p · N_p + a_¬p · (N_total − N_p) = K · (W_new − W_prev)[m, p]
//! ```
//!
//! where `a_q` is the per-sample probe update of class `q` at `[m, p]` and
//! `a_¬p` the mean of the other classes. Each node gives one estimate of
//! `N_p`; estimates are combined with confidence weights `a_p / a_¬p`.

use serde::{Deserialize, Serialize};

use crate::data::{AuxiliarySet, ClientDataset, TrainingSlice};
use crate::error::{Error, Result};
use crate::nn::{compute_loss, LossSpec, Matrix, MlpModel};
use crate::parallel::Execution;

/// Per-class last-layer probe updates, each `s × Q`, summed over the class's
/// auxiliary samples and scaled by `−step_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxGradients {
    pub per_class: Vec<Matrix>,
    pub aux_counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorParams {
    /// Nodes whose denominator `|a_p − a_¬p|` is below this fraction of the
    /// class's largest denominator are skipped.
    pub denom_epsilon: f64,
    /// Nodes with oriented confidence `−a_p / a_¬p` at or below this are skipped.
    pub confidence_floor: f64,
    /// Multiplier on the derived probe step factor.
    pub scale_cal: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            denom_epsilon: 1e-6,
            confidence_floor: 0.0,
            scale_cal: 1.0,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.denom_epsilon > 0.0) {
            return Err(Error::InvalidArgument("denom_epsilon must be > 0".into()));
        }
        if !(self.scale_cal > 0.0) || !self.scale_cal.is_finite() {
            return Err(Error::InvalidArgument("scale_cal must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEstimate {
    pub node: usize,
    pub estimate: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub counts: Vec<f64>,
    /// Surviving per-node estimates for each class.
    pub nodes: Vec<Vec<NodeEstimate>>,
    /// Classes whose nodes were all skipped and fell back to `total / Q`.
    pub fallback: Vec<bool>,
}

impl CountEstimate {
    pub fn used_node_count(&self) -> Vec<usize> {
        self.nodes.iter().map(Vec::len).collect()
    }
}

/// Runs each class's auxiliary group through `prev_model` under `loss` and
/// returns `−step_factor · Σ_i ∇_W ℓ_i` per class. `prev_model` is untouched.
pub fn probe_auxiliary(
    prev_model: &MlpModel,
    aux: &AuxiliarySet,
    loss: &LossSpec,
    step_factor: f64,
    exec: Execution,
) -> Result<AuxGradients> {
    let q = prev_model.num_classes();
    if aux.num_classes() != q {
        return Err(Error::Shape(format!(
            "auxiliary set covers {} classes, model has {q}",
            aux.num_classes()
        )));
    }
    if let Some(empty) = aux.groups.iter().position(|g| g.rows() == 0) {
        return Err(Error::InvalidArgument(format!(
            "class {empty} has an empty auxiliary group"
        )));
    }
    let per_class = exec.map_range(q, |class| -> Result<Matrix> {
        let group = &aux.groups[class];
        let acts = prev_model.forward(group)?;
        let labels = vec![class; group.rows()];
        let (_, grad_logits) = compute_loss(&acts, &labels, loss)?;
        // backward averages over the group; undo that to get the sum.
        let mut g = prev_model
            .backward(&acts, &grad_logits)?
            .weights
            .pop()
            .unwrap();
        g.scale(-step_factor * group.rows() as f64);
        Ok(g)
    });
    Ok(AuxGradients {
        per_class: per_class.into_iter().collect::<Result<_>>()?,
        aux_counts: aux.per_class_count(),
    })
}

/// Solves the per-node linear relation for every class and combines the
/// node estimates by confidence weighting. `clients` is the number `K` of
/// aggregated clients and `total_samples` their disclosed sample total.
pub fn estimate_counts(
    aux: &AuxGradients,
    w_prev: &Matrix,
    w_new: &Matrix,
    total_samples: f64,
    clients: usize,
    params: &EstimatorParams,
) -> Result<CountEstimate> {
    params.validate()?;
    let q = aux.per_class.len();
    let (s, cols) = w_prev.shape();
    if q < 2
        || cols != q
        || w_new.shape() != w_prev.shape()
        || aux.per_class.iter().any(|g| g.shape() != (s, q))
    {
        return Err(Error::Shape(
            "probe updates and weight matrices disagree".into(),
        ));
    }
    if aux.aux_counts.len() != q || aux.aux_counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "every class needs auxiliary samples".into(),
        ));
    }
    if !(total_samples > 0.0) {
        return Err(Error::InvalidArgument("total_samples must be > 0".into()));
    }
    let k = clients as f64;

    let mut counts = vec![0.0; q];
    let mut nodes = vec![Vec::new(); q];
    let mut fallback = vec![false; q];
    for p in 0..q {
        // Per-sample probe updates at entry (m, p).
        let per_sample =
            |class: usize, m: usize| aux.per_class[class].get(m, p) / aux.aux_counts[class] as f64;
        let mut raw = Vec::with_capacity(s);
        for m in 0..s {
            let a_p = per_sample(p, m);
            let a_rest = (0..q)
                .filter(|&c| c != p)
                .map(|c| per_sample(c, m))
                .sum::<f64>()
                / (q - 1) as f64;
            let observed = k * (w_new.get(m, p) - w_prev.get(m, p));
            raw.push((m, a_p, a_rest, observed));
        }
        let max_den = raw
            .iter()
            .map(|&(_, a_p, a_rest, _)| (a_p - a_rest).abs())
            .fold(0.0, f64::max);

        let mut saturated = Vec::new();
        for &(m, a_p, a_rest, observed) in &raw {
            let den = a_p - a_rest;
            if max_den == 0.0 || den.abs() < params.denom_epsilon * max_den {
                continue;
            }
            let estimate = (observed - a_rest * total_samples) / den;
            if a_rest == 0.0 {
                // The other classes leave this connection alone; its estimate
                // is free of cross-class contamination.
                saturated.push(NodeEstimate {
                    node: m,
                    estimate,
                    confidence: f64::INFINITY,
                });
                continue;
            }
            let confidence = -a_p / a_rest;
            if confidence > params.confidence_floor && confidence.is_finite() {
                nodes[p].push(NodeEstimate {
                    node: m,
                    estimate,
                    confidence,
                });
            }
        }
        if !saturated.is_empty() {
            nodes[p] = saturated;
        }
        let used = &nodes[p];
        counts[p] = if used.is_empty() {
            fallback[p] = true;
            total_samples / q as f64
        } else if used[0].confidence.is_infinite() {
            used.iter().map(|n| n.estimate).sum::<f64>() / used.len() as f64
        } else {
            let norm: f64 = used.iter().map(|n| n.confidence).sum();
            used.iter().map(|n| n.confidence / norm * n.estimate).sum()
        };
        counts[p] = counts[p].clamp(0.0, total_samples);
    }
    Ok(CountEstimate {
        counts,
        nodes,
        fallback,
    })
}

/// Normalizes counts to a probability vector. An all-zero input yields the
/// uniform ratio and `true` as the warning flag.
pub fn counts_to_ratio(counts: &[f64]) -> Result<(Vec<f64>, bool)> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("empty count vector".into()));
    }
    if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "counts must be finite and >= 0: {counts:?}"
        )));
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        let q = counts.len() as f64;
        return Ok((vec![1.0 / q; counts.len()], true));
    }
    Ok((counts.iter().map(|c| c / total).collect(), false))
}

/// Ground-truth class counts of the given client slices. Simulation only.
pub fn oracle_counts(slices: &[(&ClientDataset, &TrainingSlice)], num_classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; num_classes];
    for (client, slice) in slices {
        for (o, n) in out.iter_mut().zip(slice.class_counts(client)) {
            *o += n as f64;
        }
    }
    out
}

/// Average of `(1 − μ^t) / (1 − μ)` over `t = 1..=steps`: how much further
/// momentum SGD travels than plain SGD under a constant gradient.
pub fn momentum_amplification(momentum: f64, steps: usize) -> f64 {
    if momentum == 0.0 || steps == 0 {
        return 1.0;
    }
    let t = steps as f64;
    // Σ_{t=1..T} (1 − μ^t) = T − μ(1 − μ^T)/(1 − μ)
    let sum = t - momentum * (1.0 - momentum.powf(t)) / (1.0 - momentum);
    sum / (t * (1.0 - momentum))
}
