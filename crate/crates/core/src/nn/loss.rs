//! Cross-entropy, effective-number class-balanced cross-entropy, and focal
//! loss. All losses are means over the batch and return the exact gradient
//! of that mean with respect to the logits.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::Activations;
use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.999;
pub const DEFAULT_GAMMA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    PlainCe,
    /// Each sample's CE term is multiplied by
    /// `(1 − β) / (1 − β^{n_y}) / normalizer` with `n_y = per_class_n[y]`.
    ClassBalanced {
        beta: f64,
        per_class_n: Vec<f64>,
        normalizer: f64,
    },
    Focal {
        gamma: f64,
    },
}

impl LossSpec {
    pub fn class_balanced(beta: f64, per_class_n: Vec<f64>) -> Self {
        LossSpec::ClassBalanced {
            beta,
            per_class_n,
            normalizer: 1.0,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self {
            LossSpec::PlainCe => Ok(()),
            LossSpec::ClassBalanced {
                beta,
                per_class_n,
                normalizer,
            } => {
                if !(0.0..1.0).contains(beta) {
                    return Err(Error::InvalidArgument(format!("beta {beta} not in [0, 1)")));
                }
                if per_class_n.len() != num_classes {
                    return Err(Error::InvalidArgument(format!(
                        "class-balanced loss needs {num_classes} per-class counts, got {}",
                        per_class_n.len()
                    )));
                }
                if per_class_n.iter().any(|&n| !(n >= 1.0) || !n.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "per-class counts must be >= 1, got {per_class_n:?}"
                    )));
                }
                if !(*normalizer > 0.0) || !normalizer.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "loss normalizer {normalizer} must be > 0"
                    )));
                }
                Ok(())
            }
            LossSpec::Focal { gamma } => {
                if !(*gamma >= 0.0) || !gamma.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "focal gamma {gamma} must be >= 0"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Per-sample multiplier applied to class `label`.
    pub fn class_weight(&self, label: usize) -> f64 {
        match self {
            LossSpec::ClassBalanced {
                beta,
                per_class_n,
                normalizer,
            } => effective_number_weight(*beta, per_class_n[label]) / normalizer,
            _ => 1.0,
        }
    }
}

/// `(1 − β) / (1 − β^n)`, the inverse effective number of `n` samples.
pub fn effective_number_weight(beta: f64, n: f64) -> f64 {
    (1.0 - beta) / (1.0 - beta.powf(n))
}

fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Returns the mean loss and its gradient with respect to the logits.
pub fn compute_loss(
    acts: &Activations,
    labels: &[usize],
    spec: &LossSpec,
) -> Result<(f64, Matrix)> {
    let (batch, q) = acts.logits.shape();
    if labels.len() != batch {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if batch == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    spec.validate(q)?;
    if let Some(&label) = labels.iter().find(|&&y| y >= q) {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: q,
        });
    }

    let inv_b = 1.0 / batch as f64;
    let mut grad = Matrix::zeros(batch, q);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let logp = log_softmax_row(acts.logits.row(i));
        let probs = acts.probabilities.row(i);
        let g = grad.row_mut(i);
        match spec {
            LossSpec::PlainCe | LossSpec::ClassBalanced { .. } => {
                let w = spec.class_weight(y);
                total += -w * logp[y];
                for (j, gj) in g.iter_mut().enumerate() {
                    let target = if j == y { 1.0 } else { 0.0 };
                    *gj = w * (probs[j] - target) * inv_b;
                }
            }
            LossSpec::Focal { gamma } => {
                let pt = logp[y].exp();
                let one_minus = 1.0 - pt;
                let modulator = one_minus.powf(*gamma);
                total += -modulator * logp[y];
                // dL/dz_j = [γ(1−p)^{γ−1} p log p − (1−p)^γ] (δ_jy − p_j)
                let slope = if one_minus > 0.0 && *gamma != 0.0 {
                    gamma * one_minus.powf(gamma - 1.0) * pt * logp[y]
                } else {
                    0.0
                };
                let coef = slope - modulator;
                for (j, gj) in g.iter_mut().enumerate() {
                    let target = if j == y { 1.0 } else { 0.0 };
                    *gj = coef * (target - probs[j]) * inv_b;
                }
            }
        }
    }
    Ok((total * inv_b, grad))
}
