//! LSTM layer. Weights `W: (units + input, 4·units)` with rows `[h; x]` and
//! gate columns in the order forget, input, candidate, output; one bias row.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::activation::sigmoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Input, time-major `(T, B, F)`.
    pub x: Array3<f64>,
    /// `h_0 … h_T`, `(T + 1, B, u)`.
    pub h: Array3<f64>,
    /// `C_0 … C_T`.
    pub c: Array3<f64>,
    /// Activated gates per step, `(T, B, 4u)`.
    pub gates: Array3<f64>,
}

impl LstmCache {
    pub fn outputs(&self) -> ArrayView3<'_, f64> {
        self.h.slice(s![1.., .., ..])
    }

    pub fn last_h(&self) -> ArrayView2<'_, f64> {
        self.h.index_axis(Axis(0), self.h.dim().0 - 1)
    }

    pub fn last_c(&self) -> ArrayView2<'_, f64> {
        self.c.index_axis(Axis(0), self.c.dim().0 - 1)
    }
}

fn check(w: ArrayView2<f64>, b: ArrayView2<f64>, input: usize) -> Result<usize> {
    let u = w.ncols() / 4;
    if !w.ncols().is_multiple_of(4) || w.nrows() != u + input || b.dim() != (1, 4 * u) {
        return Err(Error::shape(
            format!("W ({}, {}) and b (1, {})", u + input, 4 * u, 4 * u),
            format!("W {:?} and b {:?}", w.dim(), b.dim()),
        ));
    }
    Ok(u)
}

/// Activates pre-activations `z` (B, 4u) in place and writes the new cell and
/// hidden state.
fn activate(z: &mut Array2<f64>, c_prev: ArrayView2<f64>, mut c: ndarray::ArrayViewMut2<f64>, mut h: ndarray::ArrayViewMut2<f64>) {
    let u = c_prev.ncols();
    for (bi, mut row) in z.outer_iter_mut().enumerate() {
        let row = row.as_slice_mut().expect("contiguous gate row");
        for j in 0..u {
            let f = sigmoid(row[j]);
            let i = sigmoid(row[u + j]);
            let g = row[2 * u + j].tanh();
            let o = sigmoid(row[3 * u + j]);
            row[j] = f;
            row[u + j] = i;
            row[2 * u + j] = g;
            row[3 * u + j] = o;
            let cn = f * c_prev[[bi, j]] + i * g;
            c[[bi, j]] = cn;
            h[[bi, j]] = o * cn.tanh();
        }
    }
}

/// One step of the cell; returns `(h_t, C_t)`.
pub fn lstm_cell_forward(
    w: ArrayView2<f64>,
    b: ArrayView2<f64>,
    x: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let u = check(w, b, x.ncols())?;
    if h_prev.dim() != (x.nrows(), u) || c_prev.dim() != (x.nrows(), u) {
        return Err(Error::shape(format!("({}, {u}) state", x.nrows()), format!("{:?}", h_prev.dim())));
    }
    let mut z = x.dot(&w.slice(s![u.., ..])) + b;
    general_mat_mul(1.0, &h_prev, &w.slice(s![..u, ..]), 1.0, &mut z);
    let mut h = Array2::zeros((x.nrows(), u));
    let mut c = Array2::zeros((x.nrows(), u));
    activate(&mut z, c_prev, c.view_mut(), h.view_mut());
    if h.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm state".into()));
    }
    Ok((h, c))
}

/// Runs the layer over a time-major window, optionally from a given `(h_0, C_0)`.
pub fn lstm_forward(
    w: ArrayView2<f64>,
    b: ArrayView2<f64>,
    x: ArrayView3<f64>,
    init: Option<(ArrayView2<f64>, ArrayView2<f64>)>,
) -> Result<LstmCache> {
    let (steps, batch, feat) = x.dim();
    let u = check(w, b, feat)?;
    let x = x.as_standard_layout().into_owned();
    let x2 = x.view().into_shape_with_order((steps * batch, feat)).expect("standard layout");
    let xw = x2.dot(&w.slice(s![u.., ..])) + b;
    let wh = w.slice(s![..u, ..]);

    let mut h = Array3::zeros((steps + 1, batch, u));
    let mut c = Array3::zeros((steps + 1, batch, u));
    if let Some((h0, c0)) = init {
        if h0.dim() != (batch, u) || c0.dim() != (batch, u) {
            return Err(Error::shape(format!("({batch}, {u}) initial state"), format!("{:?}", h0.dim())));
        }
        h.index_axis_mut(Axis(0), 0).assign(&h0);
        c.index_axis_mut(Axis(0), 0).assign(&c0);
    }
    let mut gates = Array3::zeros((steps, batch, 4 * u));
    for t in 0..steps {
        let mut z = xw.slice(s![t * batch..(t + 1) * batch, ..]).to_owned();
        general_mat_mul(1.0, &h.index_axis(Axis(0), t), &wh, 1.0, &mut z);
        let mut h_new = Array2::zeros((batch, u));
        let mut c_new = Array2::zeros((batch, u));
        activate(&mut z, c.index_axis(Axis(0), t), c_new.view_mut(), h_new.view_mut());
        h.index_axis_mut(Axis(0), t + 1).assign(&h_new);
        c.index_axis_mut(Axis(0), t + 1).assign(&c_new);
        gates.index_axis_mut(Axis(0), t).assign(&z);
    }
    if h.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm state".into()));
    }
    Ok(LstmCache { x, h, c, gates })
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub dx: Array3<f64>,
    pub dw: Array2<f64>,
    pub db: Array2<f64>,
    pub dh0: Array2<f64>,
    pub dc0: Array2<f64>,
}

/// Backpropagation through time. `dh` holds the loss gradient for every
/// output `h_1 … h_T`; `dc_last` is an extra gradient on `C_T`.
pub fn lstm_backward(
    w: ArrayView2<f64>,
    cache: &LstmCache,
    dh: ArrayView3<f64>,
    dc_last: Option<ArrayView2<f64>>,
) -> LstmGrads {
    let (steps, batch, feat) = cache.x.dim();
    let u = w.ncols() / 4;
    let wh = w.slice(s![..u, ..]);
    let wx = w.slice(s![u.., ..]);
    let mut da_all = Array2::zeros((steps * batch, 4 * u));
    let mut dh_next = Array2::<f64>::zeros((batch, u));
    let mut dc_next = match dc_last {
        Some(d) => d.to_owned(),
        None => Array2::zeros((batch, u)),
    };
    for t in (0..steps).rev() {
        let gates = cache.gates.index_axis(Axis(0), t);
        let c_prev = cache.c.index_axis(Axis(0), t);
        let c_cur = cache.c.index_axis(Axis(0), t + 1);
        let dh_t = dh.index_axis(Axis(0), t);
        let mut da = da_all.slice_mut(s![t * batch..(t + 1) * batch, ..]);
        for bi in 0..batch {
            let g = gates.row(bi);
            let mut d = da.row_mut(bi);
            for j in 0..u {
                let (f, i, cand, o) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
                let tc = c_cur[[bi, j]].tanh();
                let dhv = dh_t[[bi, j]] + dh_next[[bi, j]];
                let dc = dc_next[[bi, j]] + dhv * o * (1.0 - tc * tc);
                d[j] = dc * c_prev[[bi, j]] * f * (1.0 - f);
                d[u + j] = dc * cand * i * (1.0 - i);
                d[2 * u + j] = dc * i * (1.0 - cand * cand);
                d[3 * u + j] = dhv * tc * o * (1.0 - o);
                dc_next[[bi, j]] = dc * f;
            }
        }
        dh_next = da.dot(&wh.t());
    }
    let h_prev = cache.h.slice(s![..steps, .., ..]);
    let h_prev = h_prev.as_standard_layout();
    let h_prev2 = h_prev.view().into_shape_with_order((steps * batch, u)).expect("standard layout");
    let x2 = cache.x.view().into_shape_with_order((steps * batch, feat)).expect("standard layout");
    let mut dw = Array2::zeros((u + feat, 4 * u));
    dw.slice_mut(s![..u, ..]).assign(&h_prev2.t().dot(&da_all));
    dw.slice_mut(s![u.., ..]).assign(&x2.t().dot(&da_all));
    let db = da_all.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx = super::standard(da_all.dot(&wx.t()))
        .into_shape_with_order((steps, batch, feat))
        .expect("standard layout");
    LstmGrads {
        dx,
        dw,
        db,
        dh0: dh_next,
        dc0: dc_next,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
        Array2::from_shape_fn(shape, |_| rng.gen_range(-scale..scale))
    }

    #[test]
    fn zero_weights_zero_state() {
        let w = Array2::zeros((3, 8));
        let b = Array2::zeros((1, 8));
        let (h, c) = lstm_cell_forward(
            w.view(),
            b.view(),
            array![[0.7]].view(),
            Array2::zeros((1, 2)).view(),
            Array2::zeros((1, 2)).view(),
        )
        .unwrap();
        assert_eq!(h, Array2::<f64>::zeros((1, 2)));
        assert_eq!(c, Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn zero_weights_unit_cell() {
        let w = Array2::zeros((2, 4));
        let b = Array2::zeros((1, 4));
        let (h, c) = lstm_cell_forward(w.view(), b.view(), array![[0.3]].view(), array![[0.0]].view(), array![[1.0]].view()).unwrap();
        assert_abs_diff_eq!(c[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h[[0, 0]], 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(h[[0, 0]], 0.23106, epsilon = 1e-5);
    }

    #[test]
    fn saturated_forget_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = random(&mut rng, (2, 4), 0.5);
        w.row_mut(0).fill(0.0);
        w[[1, 0]] = 0.0;
        let mut b = Array2::zeros((1, 4));
        b[[0, 0]] = 100.0;
        let x = array![[0.4]];
        let c_prev = array![[0.8]];
        let (_, c) = lstm_cell_forward(w.view(), b.view(), x.view(), array![[0.0]].view(), c_prev.view()).unwrap();
        let cand = (0.4 * w[[1, 2]]).tanh();
        let i = sigmoid(0.4 * w[[1, 1]]);
        assert_abs_diff_eq!(c[[0, 0]], 0.8 + i * cand, epsilon = 1e-12);
        // with zero input weights on i, i = 0.5
        let mut w2 = w.clone();
        w2[[1, 1]] = 0.0;
        let (_, c2) = lstm_cell_forward(w2.view(), b.view(), x.view(), array![[0.0]].view(), c_prev.view()).unwrap();
        assert_abs_diff_eq!(c2[[0, 0]], 0.8 + 0.5 * cand, epsilon = 1e-12);
    }

    #[test]
    fn window_equals_manual_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (u, f, steps, batch) = (3, 2, 5, 2);
        let w = random(&mut rng, (u + f, 4 * u), 0.6);
        let b = random(&mut rng, (1, 4 * u), 0.3);
        let x = Array3::from_shape_fn((steps, batch, f), |_| rng.gen_range(-1.0..1.0));
        let cache = lstm_forward(w.view(), b.view(), x.view(), None).unwrap();
        let mut h = Array2::zeros((batch, u));
        let mut c = Array2::zeros((batch, u));
        for t in 0..steps {
            let (hn, cn) = lstm_cell_forward(w.view(), b.view(), x.index_axis(Axis(0), t), h.view(), c.view()).unwrap();
            h = hn;
            c = cn;
            assert_eq!(cache.h.index_axis(Axis(0), t + 1), h);
        }
        assert_eq!(cache.last_c(), c);
    }

    #[test]
    fn bptt_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (u, f, steps, batch) = (3, 2, 4, 2);
        let w = random(&mut rng, (u + f, 4 * u), 0.6);
        let b = random(&mut rng, (1, 4 * u), 0.3);
        let x = Array3::from_shape_fn((steps, batch, f), |_| rng.gen_range(-1.0..1.0));
        let h0 = random(&mut rng, (batch, u), 0.5);
        let c0 = random(&mut rng, (batch, u), 0.5);
        let coef = Array3::from_shape_fn((steps, batch, u), |_| rng.gen_range(-1.0..1.0));
        let coef_c = random(&mut rng, (batch, u), 1.0);
        // loss = Σ coef ⊙ h_1..T + Σ coef_c ⊙ C_T
        let loss = |w: &Array2<f64>, b: &Array2<f64>, x: &Array3<f64>, h0: &Array2<f64>, c0: &Array2<f64>| {
            let cache = lstm_forward(w.view(), b.view(), x.view(), Some((h0.view(), c0.view()))).unwrap();
            (&cache.outputs() * &coef).sum() + (&cache.last_c() * &coef_c).sum()
        };
        let cache = lstm_forward(w.view(), b.view(), x.view(), Some((h0.view(), c0.view()))).unwrap();
        let g = lstm_backward(w.view(), &cache, coef.view(), Some(coef_c.view()));
        let eps = 1e-6;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-7);
        let mut worst = 0.0f64;
        for ((i, j), &a) in g.dw.indexed_iter() {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[[i, j]] += eps;
            m[[i, j]] -= eps;
            let n = (loss(&p, &b, &x, &h0, &c0) - loss(&m, &b, &x, &h0, &c0)) / (2.0 * eps);
            worst = worst.max(rel(a, n));
        }
        for ((i, j), &a) in g.db.indexed_iter() {
            let (mut p, mut m) = (b.clone(), b.clone());
            p[[i, j]] += eps;
            m[[i, j]] -= eps;
            let n = (loss(&w, &p, &x, &h0, &c0) - loss(&w, &m, &x, &h0, &c0)) / (2.0 * eps);
            worst = worst.max(rel(a, n));
        }
        for (idx, &a) in g.dx.indexed_iter() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[idx] += eps;
            m[idx] -= eps;
            let n = (loss(&w, &b, &p, &h0, &c0) - loss(&w, &b, &m, &h0, &c0)) / (2.0 * eps);
            worst = worst.max(rel(a, n));
        }
        for ((i, j), &a) in g.dh0.indexed_iter() {
            let (mut p, mut m) = (h0.clone(), h0.clone());
            p[[i, j]] += eps;
            m[[i, j]] -= eps;
            let n = (loss(&w, &b, &x, &p, &c0) - loss(&w, &b, &x, &m, &c0)) / (2.0 * eps);
            worst = worst.max(rel(a, n));
        }
        for ((i, j), &a) in g.dc0.indexed_iter() {
            let (mut p, mut m) = (c0.clone(), c0.clone());
            p[[i, j]] += eps;
            m[[i, j]] -= eps;
            let n = (loss(&w, &b, &x, &h0, &p) - loss(&w, &b, &x, &h0, &m)) / (2.0 * eps);
            worst = worst.max(rel(a, n));
        }
        assert!(worst < 1e-6, "max relative error {worst}");
    }
}
