use super::loss::{compute_loss, LossSpec};
use super::matrix::Matrix;
use super::mlp::MlpModel;
use crate::error::{Error, Result};

/// Below this magnitude the relative error is measured against the floor
/// instead, so parameters with vanishing gradients are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-4;

fn loss_at(model: &MlpModel, batch: &Matrix, labels: &[usize], spec: &LossSpec) -> Result<f64> {
    let acts = model.forward(batch)?;
    Ok(compute_loss(&acts, labels, spec)?.0)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares `backward` against central finite differences on every
/// parameter and returns the largest relative error.
pub fn grad_check(
    model: &MlpModel,
    batch: &Matrix,
    labels: &[usize],
    spec: &LossSpec,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "eps {eps} not in (0, 1e-3]"
        )));
    }
    let acts = model.forward(batch)?;
    let (_, grad_logits) = compute_loss(&acts, labels, spec)?;
    let grads = model.backward(&acts, &grad_logits)?;

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let central = |probe: &mut MlpModel, get: &dyn Fn(&mut MlpModel) -> &mut f64| -> Result<f64> {
        let orig = *get(probe);
        *get(probe) = orig + eps;
        let plus = loss_at(probe, batch, labels, spec)?;
        *get(probe) = orig - eps;
        let minus = loss_at(probe, batch, labels, spec)?;
        *get(probe) = orig;
        Ok((plus - minus) / (2.0 * eps))
    };
    for l in 0..model.weights.len() {
        for k in 0..model.weights[l].as_slice().len() {
            let numeric = central(&mut probe, &|m| &mut m.weights[l].as_mut_slice()[k])?;
            worst = worst.max(relative_error(grads.weights[l].as_slice()[k], numeric));
        }
        for k in 0..model.biases[l].len() {
            let numeric = central(&mut probe, &|m| &mut m.biases[l][k])?;
            worst = worst.max(relative_error(grads.biases[l][k], numeric));
        }
    }
    Ok(worst)
}
