use rand::seq::SliceRandom;

use super::config::{FlConfig, Strategy};
use crate::data::{ClientDataset, TrainingSlice};
use crate::error::{Error, Result};
use crate::nn::{compute_loss, sgd_step, LossSpec, MlpModel, OptState};
use crate::rng;

/// What a client sends back after local training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub model: MlpModel,
    /// Number of samples trained on; the only statistic a client discloses.
    pub sample_count: usize,
    pub local_steps: usize,
    /// Mean batch loss over the local run.
    pub mean_loss: f64,
}

/// Uniform sample of `round(η·K_total)` distinct clients, sorted by id.
pub fn select_clients(
    num_clients: usize,
    selection_rate: f64,
    round: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let k = (selection_rate * num_clients as f64).round() as usize;
    if k == 0 || k > num_clients {
        return Err(Error::InvalidArgument(format!(
            "selection rate {selection_rate} picks {k} of {num_clients} clients"
        )));
    }
    let mut ids: Vec<usize> = (0..num_clients).collect();
    let mut rng = rng::stream(seed, &[rng::TAG_SELECT, round as u64]);
    ids.partial_shuffle(&mut rng, k);
    let mut chosen = ids[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Runs `E` epochs of shuffled mini-batch SGD from the global weights on
/// the client's in-scope rows. Returns `None` for an empty slice.
pub fn local_update(
    client: &ClientDataset,
    slice: &TrainingSlice,
    global: &MlpModel,
    config: &FlConfig,
    loss: &LossSpec,
    round: usize,
    seed: u64,
) -> Result<Option<ClientUpdate>> {
    if slice.is_empty() {
        return Ok(None);
    }
    let mut model = global.clone();
    let mut opt = OptState::new(&model, config.lr, config.momentum)?;
    let mut rng = rng::stream(
        seed,
        &[rng::TAG_LOCAL, round as u64, client.client_id as u64],
    );
    let mut order = slice.indices.clone();
    let prox = match config.strategy {
        Strategy::FedProx if config.prox_mu > 0.0 => Some(config.prox_mu),
        _ => None,
    };
    let data = &client.dataset;
    let mut steps = 0;
    let mut loss_sum = 0.0;
    for _ in 0..config.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let x = data.features.select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let acts = model.forward(&x)?;
            let (l, grad_logits) = compute_loss(&acts, &y, loss)?;
            let mut grads = model.backward(&acts, &grad_logits)?;
            if let Some(mu) = prox {
                for (g, (w, w0)) in grads
                    .weights
                    .iter_mut()
                    .zip(model.weights.iter().zip(&global.weights))
                {
                    g.add_scaled(&w.sub(w0)?, mu)?;
                }
                for (g, (b, b0)) in grads
                    .biases
                    .iter_mut()
                    .zip(model.biases.iter().zip(&global.biases))
                {
                    for ((g, b), b0) in g.iter_mut().zip(b).zip(b0) {
                        *g += mu * (b - b0);
                    }
                }
            }
            sgd_step(&mut model, &grads, &mut opt)?;
            steps += 1;
            loss_sum += l;
        }
    }
    Ok(Some(ClientUpdate {
        client_id: client.client_id,
        model,
        sample_count: slice.len(),
        local_steps: steps,
        mean_loss: loss_sum / steps as f64,
    }))
}
