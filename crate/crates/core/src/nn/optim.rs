use super::matrix::Matrix;
use super::mlp::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// SGD with heavy-ball momentum: `v ← μ·v + g`, `w ← w − α·v`.
#[derive(Debug, Clone)]
pub struct OptState {
    pub lr: f64,
    pub momentum: f64,
    weight_buffers: Vec<Matrix>,
    bias_buffers: Vec<Vec<f64>>,
}

impl OptState {
    pub fn new(model: &MlpModel, lr: f64, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {momentum} not in [0, 1)"
            )));
        }
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate {lr} must be >= 0"
            )));
        }
        let zeros = Gradients::zeros_like(model);
        Ok(OptState {
            lr,
            momentum,
            weight_buffers: zeros.weights,
            bias_buffers: zeros.biases,
        })
    }

    pub fn weight_buffers(&self) -> &[Matrix] {
        &self.weight_buffers
    }
}

pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, state: &mut OptState) -> Result<()> {
    let shapes_match = grads.weights.len() == model.weights.len()
        && state.weight_buffers.len() == model.weights.len()
        && model
            .weights
            .iter()
            .zip(&grads.weights)
            .zip(&state.weight_buffers)
            .all(|((w, g), v)| w.shape() == g.shape() && w.shape() == v.shape())
        && model
            .biases
            .iter()
            .zip(&grads.biases)
            .zip(&state.bias_buffers)
            .all(|((b, g), v)| b.len() == g.len() && b.len() == v.len());
    if !shapes_match {
        return Err(Error::Shape(
            "gradients or optimizer state do not mirror the model".into(),
        ));
    }
    let (lr, mu) = (state.lr, state.momentum);
    let update = |w: &mut [f64], g: &[f64], v: &mut [f64]| {
        for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = mu * *v + g;
            *w -= lr * *v;
        }
    };
    for ((w, g), v) in model
        .weights
        .iter_mut()
        .zip(&grads.weights)
        .zip(&mut state.weight_buffers)
    {
        update(w.as_mut_slice(), g.as_slice(), v.as_mut_slice());
    }
    for ((b, g), v) in model
        .biases
        .iter_mut()
        .zip(&grads.biases)
        .zip(&mut state.bias_buffers)
    {
        update(b, g, v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model(w: f64) -> MlpModel {
        MlpModel {
            layer_sizes: vec![1, 1],
            weights: vec![Matrix::from_vec(1, 1, vec![w]).unwrap()],
            biases: vec![vec![0.0]],
        }
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            weights: vec![Matrix::from_vec(1, 1, vec![g]).unwrap()],
            biases: vec![vec![0.0]],
        }
    }

    #[test]
    fn plain_step_is_exact() {
        let mut m = scalar_model(1.0);
        let mut st = OptState::new(&m, 0.001, 0.0).unwrap();
        sgd_step(&mut m, &scalar_grad(2.0), &mut st).unwrap();
        assert_eq!(m.weights[0].get(0, 0), 1.0 - 0.001 * 2.0);
        assert!((m.weights[0].get(0, 0) - 0.998).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_model() {
        let mut m = MlpModel::init(&[3, 4, 2], 5).unwrap();
        let before = m.clone();
        let mut st = OptState::new(&m, 0.1, 0.9).unwrap();
        let zero = Gradients::zeros_like(&m);
        sgd_step(&mut m, &zero, &mut st).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn momentum_matches_hand_unrolled_recurrence() {
        // v1 = g1, w1 = w0 − α g1; v2 = μ g1 + g2, w2 = w1 − α (μ g1 + g2)
        let (w0, g1, g2, lr, mu) = (0.5, 1.5, -0.25, 0.1, 0.9);
        let mut m = scalar_model(w0);
        let mut st = OptState::new(&m, lr, mu).unwrap();
        sgd_step(&mut m, &scalar_grad(g1), &mut st).unwrap();
        sgd_step(&mut m, &scalar_grad(g2), &mut st).unwrap();
        let expected = w0 - lr * g1 - lr * (mu * g1 + g2);
        assert!((m.weights[0].get(0, 0) - expected).abs() < 1e-15);
        assert!((st.weight_buffers()[0].get(0, 0) - (mu * g1 + g2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut m = MlpModel::init(&[3, 4, 2], 5).unwrap();
        let other = MlpModel::init(&[3, 5, 2], 5).unwrap();
        let mut st = OptState::new(&m, 0.1, 0.0).unwrap();
        assert!(sgd_step(&mut m, &Gradients::zeros_like(&other), &mut st).is_err());
        assert!(OptState::new(&m, 0.1, 1.0).is_err());
    }
}
