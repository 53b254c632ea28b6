//! Dense, LSTM and GRU layers with exact backpropagation, and the five
//! reference architectures.

pub mod activation;
pub mod dense;
pub mod gru;
pub mod lstm;
mod model;
pub mod spec;

use ndarray::{Array, Dimension};

/// Row-major copy only when needed, so owned results of `dot` can be reshaped.
pub(crate) fn standard<D: Dimension>(a: Array<f64, D>) -> Array<f64, D> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

pub use activation::Activation;
pub use model::{gradient_check, mse, GradCheck, LossGrad, Model, Tape, Tensor, GRAD_CHECK_FLOOR};
pub use spec::{build_model, miniature, param_count, LayerSpec, ModelKind, ModelSpec, Shape};
