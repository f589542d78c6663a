use super::client::ClientUpdate;
use super::config::Strategy;
use crate::error::{Error, Result};
use crate::nn::MlpModel;

/// Aggregation weights `n_k / Σ n` over the given updates.
pub fn sample_weights(updates: &[ClientUpdate]) -> Vec<f64> {
    let total: usize = updates.iter().map(|u| u.sample_count).sum();
    updates
        .iter()
        .map(|u| u.sample_count as f64 / total as f64)
        .collect()
}

/// Combines client models in the given order.
///
/// FedAvg/FedProx: `Σ p_k w_k`. FedNova: `w + τ_eff Σ p_k (w_k − w) / τ_k`
/// with `τ_eff = Σ p_k τ_k` and `τ_k` the client's local step count.
pub fn aggregate(
    updates: &[ClientUpdate],
    global: &MlpModel,
    strategy: Strategy,
) -> Result<MlpModel> {
    if updates.is_empty() {
        return Err(Error::InvalidArgument(
            "no client updates to aggregate".into(),
        ));
    }
    if updates.iter().any(|u| !u.model.same_shape(global)) {
        return Err(Error::Shape(
            "client model shape differs from the global model".into(),
        ));
    }
    if updates
        .iter()
        .any(|u| u.sample_count == 0 || u.local_steps == 0)
    {
        return Err(Error::InvalidArgument(
            "client update with no samples or steps".into(),
        ));
    }
    let p = sample_weights(updates);
    let mut out = global.clone();
    match strategy {
        Strategy::FedAvg | Strategy::FedProx => {
            out.weights.iter_mut().for_each(|w| w.scale(0.0));
            out.biases
                .iter_mut()
                .for_each(|b| b.iter_mut().for_each(|v| *v = 0.0));
            for (u, &pk) in updates.iter().zip(&p) {
                for (o, w) in out.weights.iter_mut().zip(&u.model.weights) {
                    o.add_scaled(w, pk)?;
                }
                for (o, b) in out.biases.iter_mut().zip(&u.model.biases) {
                    o.iter_mut().zip(b).for_each(|(o, b)| *o += pk * b);
                }
            }
        }
        Strategy::FedNova => {
            let tau_eff: f64 = updates
                .iter()
                .zip(&p)
                .map(|(u, pk)| pk * u.local_steps as f64)
                .sum();
            for (u, &pk) in updates.iter().zip(&p) {
                let coef = tau_eff * pk / u.local_steps as f64;
                for ((o, w), g) in out
                    .weights
                    .iter_mut()
                    .zip(&u.model.weights)
                    .zip(&global.weights)
                {
                    o.add_scaled(&w.sub(g)?, coef)?;
                }
                for ((o, b), g) in out
                    .biases
                    .iter_mut()
                    .zip(&u.model.biases)
                    .zip(&global.biases)
                {
                    for ((o, b), g) in o.iter_mut().zip(b).zip(g) {
                        *o += coef * (b - g);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn update(id: usize, seed: u64, n: usize, steps: usize) -> ClientUpdate {
        ClientUpdate {
            client_id: id,
            model: MlpModel::init(&[3, 4, 2], seed).unwrap(),
            sample_count: n,
            local_steps: steps,
            mean_loss: 0.0,
        }
    }

    #[test]
    fn single_client_is_verbatim() {
        let g = MlpModel::init(&[3, 4, 2], 0).unwrap();
        let u = update(0, 1, 10, 3);
        for s in [Strategy::FedAvg, Strategy::FedProx] {
            assert_eq!(aggregate(std::slice::from_ref(&u), &g, s).unwrap(), u.model);
        }
    }

    #[test]
    fn equal_counts_average() {
        let g = MlpModel::init(&[3, 4, 2], 0).unwrap();
        let (a, b) = (update(0, 1, 10, 3), update(1, 2, 10, 3));
        let m = aggregate(&[a.clone(), b.clone()], &g, Strategy::FedAvg).unwrap();
        let expected = (a.model.weights[1].get(2, 1) + b.model.weights[1].get(2, 1)) / 2.0;
        assert!((m.weights[1].get(2, 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn weights_follow_sample_counts() {
        let ups = [update(0, 1, 10, 1), update(1, 2, 30, 1)];
        let p = sample_weights(&ups);
        assert_eq!(p, vec![0.25, 0.75]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fednova_matches_fedavg_under_equal_steps() {
        let g = MlpModel::init(&[3, 4, 2], 0).unwrap();
        let ups = [update(0, 1, 10, 4), update(1, 2, 25, 4), update(2, 3, 7, 4)];
        let avg = aggregate(&ups, &g, Strategy::FedAvg).unwrap();
        let nova = aggregate(&ups, &g, Strategy::FedNova).unwrap();
        for (a, b) in avg.weights.iter().zip(&nova.weights) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn empty_is_an_error() {
        let g = MlpModel::init(&[3, 4, 2], 0).unwrap();
        assert!(aggregate(&[], &g, Strategy::FedAvg).is_err());
    }
}
