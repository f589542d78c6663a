//! Dense feed-forward classifier with manual back-propagation.

mod gradcheck;
mod loss;
mod matrix;
mod mlp;
mod optim;

pub use gradcheck::{grad_check, relative_error, REL_ERR_FLOOR};
pub use loss::{compute_loss, effective_number_weight, LossSpec, DEFAULT_BETA, DEFAULT_GAMMA};
pub use matrix::Matrix;
pub use mlp::{argmax, softmax_rows, Activations, Gradients, MlpModel};
pub use optim::{sgd_step, OptState};
