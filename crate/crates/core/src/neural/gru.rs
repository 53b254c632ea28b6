//! GRU layer. Weights `W: (units + input, 3·units)` with rows `[h; x]` and
//! gate columns reset, update, candidate. Two bias rows (input side and
//! recurrent side) are both added to every gate pre-activation. The reset gate
//! multiplies `h_{t−1}` before the candidate matmul, and
//! `h_t = (1 − z)·h_{t−1} + z·h̃`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::activation::sigmoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Array3<f64>,
    /// `h_0 … h_T`.
    pub h: Array3<f64>,
    /// `r ⊙ h_{t−1}` per step.
    pub rh: Array3<f64>,
    /// Activated `r, z, h̃` per step, `(T, B, 3u)`.
    pub gates: Array3<f64>,
}

impl GruCache {
    pub fn outputs(&self) -> ArrayView3<'_, f64> {
        self.h.slice(s![1.., .., ..])
    }

    pub fn last_h(&self) -> ArrayView2<'_, f64> {
        self.h.index_axis(Axis(0), self.h.dim().0 - 1)
    }
}

fn check(w: ArrayView2<f64>, b_in: ArrayView2<f64>, b_rec: ArrayView2<f64>, input: usize) -> Result<usize> {
    let u = w.ncols() / 3;
    if !w.ncols().is_multiple_of(3) || w.nrows() != u + input || b_in.dim() != (1, 3 * u) || b_rec.dim() != (1, 3 * u) {
        return Err(Error::shape(
            format!("W ({}, {}) and two (1, {}) biases", u + input, 3 * u, 3 * u),
            format!("W {:?}, biases {:?} {:?}", w.dim(), b_in.dim(), b_rec.dim()),
        ));
    }
    Ok(u)
}

/// One step from the precomputed input projection `xw = x·W_x + b_in + b_rec`.
/// Overwrites `xw` with the activated gates and returns `(h_t, r ⊙ h_{t−1})`.
fn step(xw: &mut Array2<f64>, h_prev: ArrayView2<f64>, w: ArrayView2<f64>, u: usize) -> (Array2<f64>, Array2<f64>) {
    let batch = h_prev.nrows();
    {
        let mut rz = xw.slice_mut(s![.., ..2 * u]);
        general_mat_mul(1.0, &h_prev, &w.slice(s![..u, ..2 * u]), 1.0, &mut rz);
        rz.mapv_inplace(sigmoid);
    }
    let rh = &h_prev * &xw.slice(s![.., ..u]);
    {
        let mut cand = xw.slice_mut(s![.., 2 * u..]);
        general_mat_mul(1.0, &rh, &w.slice(s![..u, 2 * u..]), 1.0, &mut cand);
        cand.mapv_inplace(f64::tanh);
    }
    let mut h = Array2::zeros((batch, u));
    for bi in 0..batch {
        for j in 0..u {
            let z = xw[[bi, u + j]];
            h[[bi, j]] = (1.0 - z) * h_prev[[bi, j]] + z * xw[[bi, 2 * u + j]];
        }
    }
    (h, rh)
}

pub fn gru_cell_forward(
    w: ArrayView2<f64>,
    b_in: ArrayView2<f64>,
    b_rec: ArrayView2<f64>,
    x: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let u = check(w, b_in, b_rec, x.ncols())?;
    if h_prev.dim() != (x.nrows(), u) {
        return Err(Error::shape(format!("({}, {u}) state", x.nrows()), format!("{:?}", h_prev.dim())));
    }
    let mut xw = x.dot(&w.slice(s![u.., ..])) + b_in + b_rec;
    let (h, _) = step(&mut xw, h_prev, w, u);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gru state".into()));
    }
    Ok(h)
}

pub fn gru_forward(
    w: ArrayView2<f64>,
    b_in: ArrayView2<f64>,
    b_rec: ArrayView2<f64>,
    x: ArrayView3<f64>,
    h0: Option<ArrayView2<f64>>,
) -> Result<GruCache> {
    let (steps, batch, feat) = x.dim();
    let u = check(w, b_in, b_rec, feat)?;
    let x = x.as_standard_layout().into_owned();
    let x2 = x.view().into_shape_with_order((steps * batch, feat)).expect("standard layout");
    let xw = x2.dot(&w.slice(s![u.., ..])) + b_in + b_rec;
    let mut h = Array3::zeros((steps + 1, batch, u));
    if let Some(h0) = h0 {
        if h0.dim() != (batch, u) {
            return Err(Error::shape(format!("({batch}, {u}) initial state"), format!("{:?}", h0.dim())));
        }
        h.index_axis_mut(Axis(0), 0).assign(&h0);
    }
    let mut rh = Array3::zeros((steps, batch, u));
    let mut gates = Array3::zeros((steps, batch, 3 * u));
    for t in 0..steps {
        let mut z = xw.slice(s![t * batch..(t + 1) * batch, ..]).to_owned();
        let (hn, rhn) = step(&mut z, h.index_axis(Axis(0), t), w, u);
        h.index_axis_mut(Axis(0), t + 1).assign(&hn);
        rh.index_axis_mut(Axis(0), t).assign(&rhn);
        gates.index_axis_mut(Axis(0), t).assign(&z);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gru state".into()));
    }
    Ok(GruCache { x, h, rh, gates })
}

#[derive(Debug, Clone)]
pub struct GruGrads {
    pub dx: Array3<f64>,
    pub dw: Array2<f64>,
    pub db_in: Array2<f64>,
    pub db_rec: Array2<f64>,
    pub dh0: Array2<f64>,
}

pub fn gru_backward(w: ArrayView2<f64>, cache: &GruCache, dh: ArrayView3<f64>) -> GruGrads {
    let (steps, batch, feat) = cache.x.dim();
    let u = w.ncols() / 3;
    let wh_rz = w.slice(s![..u, ..2 * u]);
    let wh_c = w.slice(s![..u, 2 * u..]);
    let mut da_all = Array2::zeros((steps * batch, 3 * u));
    let mut dh_next = Array2::<f64>::zeros((batch, u));
    for t in (0..steps).rev() {
        let g = cache.gates.index_axis(Axis(0), t);
        let h_prev = cache.h.index_axis(Axis(0), t);
        let dh_t = dh.index_axis(Axis(0), t);
        let mut da = da_all.slice_mut(s![t * batch..(t + 1) * batch, ..]);
        let mut dh_prev = Array2::zeros((batch, u));
        for bi in 0..batch {
            for j in 0..u {
                let (z, c) = (g[[bi, u + j]], g[[bi, 2 * u + j]]);
                let d = dh_t[[bi, j]] + dh_next[[bi, j]];
                da[[bi, 2 * u + j]] = d * z * (1.0 - c * c);
                da[[bi, u + j]] = d * (c - h_prev[[bi, j]]) * z * (1.0 - z);
                dh_prev[[bi, j]] = d * (1.0 - z);
            }
        }
        let d_rh = da.slice(s![.., 2 * u..]).dot(&wh_c.t());
        for bi in 0..batch {
            for j in 0..u {
                let r = g[[bi, j]];
                da[[bi, j]] = d_rh[[bi, j]] * h_prev[[bi, j]] * r * (1.0 - r);
                dh_prev[[bi, j]] += d_rh[[bi, j]] * r;
            }
        }
        general_mat_mul(1.0, &da.slice(s![.., ..2 * u]), &wh_rz.t(), 1.0, &mut dh_prev);
        dh_next = dh_prev;
    }
    let h_prev = cache.h.slice(s![..steps, .., ..]);
    let h_prev = h_prev.as_standard_layout();
    let h_prev2 = h_prev.view().into_shape_with_order((steps * batch, u)).expect("standard layout");
    let rh2 = cache.rh.view().into_shape_with_order((steps * batch, u)).expect("standard layout");
    let x2 = cache.x.view().into_shape_with_order((steps * batch, feat)).expect("standard layout");
    let mut dw = Array2::zeros((u + feat, 3 * u));
    dw.slice_mut(s![..u, ..2 * u]).assign(&h_prev2.t().dot(&da_all.slice(s![.., ..2 * u])));
    dw.slice_mut(s![..u, 2 * u..]).assign(&rh2.t().dot(&da_all.slice(s![.., 2 * u..])));
    dw.slice_mut(s![u.., ..]).assign(&x2.t().dot(&da_all));
    let db = da_all.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx = super::standard(da_all.dot(&w.slice(s![u.., ..]).t()))
        .into_shape_with_order((steps, batch, feat))
        .expect("standard layout");
    GruGrads {
        dx,
        dw,
        db_in: db.clone(),
        db_rec: db,
        dh0: dh_next,
    }
}
