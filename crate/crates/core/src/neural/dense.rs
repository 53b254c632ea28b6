use ndarray::{Array2, ArrayView2, Axis};

use super::activation::Activation;
use crate::error::{Error, Result};

/// Values kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Array2<f64>,
    pub pre: Array2<f64>,
    pub out: Array2<f64>,
}

/// `y = act(x·W + b)` with `W: (in, out)`, `b: (1, out)`.
pub fn dense_forward(
    w: ArrayView2<f64>,
    b: ArrayView2<f64>,
    x: ArrayView2<f64>,
    act: Activation,
) -> Result<(Array2<f64>, DenseCache)> {
    if x.ncols() != w.nrows() || b.dim() != (1, w.ncols()) {
        return Err(Error::shape(
            format!("(batch, {}) input and (1, {}) bias", w.nrows(), w.ncols()),
            format!("{:?} input and {:?} bias", x.dim(), b.dim()),
        ));
    }
    let pre = x.dot(&w) + b;
    let out = act.forward(&pre);
    let cache = DenseCache {
        x: x.to_owned(),
        pre,
        out: out.clone(),
    };
    Ok((out, cache))
}

/// `λ·ΣW²`; the bias is not regularised.
pub fn l2_penalty(w: ArrayView2<f64>, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda * w.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Returns `(dx, dW, db)`; `dW` includes `2λW`.
pub fn dense_backward(
    w: ArrayView2<f64>,
    cache: &DenseCache,
    act: Activation,
    lambda: f64,
    dy: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let da = act.backward(cache.pre.view(), cache.out.view(), dy);
    let dx = da.dot(&w.t());
    let mut dw = cache.x.t().dot(&da);
    if lambda != 0.0 {
        dw.scaled_add(2.0 * lambda, &w);
    }
    let db = da.sum_axis(Axis(0)).insert_axis(Axis(0));
    (dx, dw, db)
}
