use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::rng;

/// Dense ReLU network with a linear output layer of width `Q`.
///
/// `weights[l]` has shape `fan_in × fan_out`, so the last one is the `s × Q`
/// connection matrix between the last hidden layer and the output logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Everything `forward` computed for one batch.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `inputs[l]` is the input to layer `l`; `inputs[0]` is the batch and
    /// the last entry is the output of the last hidden layer.
    pub inputs: Vec<Matrix>,
    pub logits: Matrix,
    pub probabilities: Matrix,
}

impl Activations {
    pub fn hidden_outputs(&self) -> &Matrix {
        self.inputs.last().expect("at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.logits.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Gradient with respect to the last-layer connection weights `W`.
    pub fn last_layer_grad(&self) -> &Matrix {
        self.weights.last().expect("at least one layer")
    }
}

impl MlpModel {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "an MLP needs at least an input and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "zero-width layer in {layer_sizes:?}"
            )));
        }
        let mut rng = rng::stream(seed, &[rng::TAG_INIT]);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Width `s` of the last hidden layer (the input width when there is none).
    pub fn last_hidden_size(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn last_layer(&self) -> &Matrix {
        self.weights.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.as_slice().len())
            .sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn same_shape(&self, other: &MlpModel) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Activations> {
        if batch.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_width()
            )));
        }
        let depth = self.weights.len();
        let mut inputs = Vec::with_capacity(depth);
        inputs.push(batch.clone());
        let mut logits = None;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = inputs[l].matmul(w)?;
            for r in 0..z.rows() {
                for (v, bias) in z.row_mut(r).iter_mut().zip(b) {
                    *v += bias;
                }
            }
            if l + 1 == depth {
                logits = Some(z);
            } else {
                inputs.push(z.map(|v| v.max(0.0)));
            }
        }
        let logits = logits.expect("at least one layer");
        let probabilities = softmax_rows(&logits);
        Ok(Activations {
            inputs,
            logits,
            probabilities,
        })
    }

    /// Back-propagates `grad_logits` (the gradient of the scalar loss with
    /// respect to the logits) through the network.
    pub fn backward(&self, acts: &Activations, grad_logits: &Matrix) -> Result<Gradients> {
        if grad_logits.shape() != acts.logits.shape() {
            return Err(Error::Shape(format!(
                "grad_logits is {:?}, logits are {:?}",
                grad_logits.shape(),
                acts.logits.shape()
            )));
        }
        if acts.inputs.len() != self.weights.len() {
            return Err(Error::Shape(
                "activations do not belong to this model".into(),
            ));
        }
        let depth = self.weights.len();
        let mut weights = vec![Matrix::zeros(0, 0); depth];
        let mut biases = vec![Vec::new(); depth];
        let mut delta = grad_logits.clone();
        for l in (0..depth).rev() {
            let input = &acts.inputs[l];
            weights[l] = input.t_matmul(&delta)?;
            biases[l] = delta.sum_rows();
            if l > 0 {
                let mut upstream = delta.matmul_t(&self.weights[l])?;
                // ReLU mask from the stored post-activation values.
                for (g, &h) in upstream.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if h <= 0.0 {
                        *g = 0.0;
                    }
                }
                delta = upstream;
            }
        }
        Ok(Gradients { weights, biases })
    }

    /// Argmax class per row.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        let acts = self.forward(batch)?;
        Ok((0..acts.logits.rows())
            .map(|r| argmax(acts.logits.row(r)))
            .collect())
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_determinism() {
        let a = MlpModel::init(&[4, 8, 3], 7).unwrap();
        assert_eq!(a.weights[0].shape(), (4, 8));
        assert_eq!(a.weights[1].shape(), (8, 3));
        assert_eq!(a.last_hidden_size(), 8);
        assert_eq!(a, MlpModel::init(&[4, 8, 3], 7).unwrap());
        assert_ne!(a, MlpModel::init(&[4, 8, 3], 8).unwrap());
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.weights[0].as_slice().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn init_rejects_degenerate_layouts() {
        assert!(MlpModel::init(&[4], 1).is_err());
        assert!(MlpModel::init(&[], 1).is_err());
        assert!(MlpModel::init(&[4, 0, 3], 1).is_err());
    }

    #[test]
    fn zero_model_gives_uniform_probabilities() {
        let mut m = MlpModel::init(&[3, 5, 4], 1).unwrap();
        m.weights.iter_mut().for_each(|w| w.scale(0.0));
        let acts = m.forward(&Matrix::zeros(2, 3)).unwrap();
        assert!(acts
            .probabilities
            .as_slice()
            .iter()
            .all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(acts.hidden_outputs().shape(), (2, 5));
    }

    #[test]
    fn probabilities_normalize_and_logits_are_affine_in_hidden() {
        let m = MlpModel::init(&[3, 6, 4], 3).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![30.0, 40.0, -50.0]]).unwrap();
        let acts = m.forward(&x).unwrap();
        for r in 0..2 {
            let s: f64 = acts.probabilities.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            for q in 0..4 {
                let h = acts.hidden_outputs().row(r);
                let manual: f64 =
                    (0..6).map(|k| h[k] * m.last_layer().get(k, q)).sum::<f64>() + m.biases[1][q];
                assert!((manual - acts.logits.get(r, q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = MlpModel::init(&[3, 4, 2], 1).unwrap();
        assert!(m.forward(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn zero_upstream_gradient_is_zero_everywhere() {
        let m = MlpModel::init(&[3, 4, 2], 1).unwrap();
        let acts = m
            .forward(&Matrix::from_vec(2, 3, vec![1.0; 6]).unwrap())
            .unwrap();
        let g = m.backward(&acts, &Matrix::zeros(2, 2)).unwrap();
        assert!(g
            .weights
            .iter()
            .all(|w| w.as_slice().iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }
}
