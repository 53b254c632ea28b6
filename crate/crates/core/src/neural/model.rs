use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{dense_backward, dense_forward, l2_penalty, DenseCache};
use super::gru::{gru_backward, gru_forward, GruCache};
use super::lstm::{lstm_backward, lstm_forward, LstmCache};
use super::spec::{param_count, LayerPlan, LayerSpec, ModelSpec, Shape};
use crate::error::{Error, Result};

/// A batch of activations. Sequences are stored time-major `(T, B, F)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Flat(Array2<f64>),
    Seq(Array3<f64>),
}

impl Tensor {
    /// From batch-major windows `(N, W, F)`.
    pub fn from_windows(x: ArrayView3<f64>) -> Tensor {
        Tensor::Seq(x.permuted_axes([1, 0, 2]).as_standard_layout().into_owned())
    }

    pub fn batch(&self) -> usize {
        match self {
            Tensor::Flat(a) => a.nrows(),
            Tensor::Seq(a) => a.dim().1,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Tensor::Flat(a) => Shape::Flat(a.ncols()),
            Tensor::Seq(a) => Shape::Seq(a.dim().0, a.dim().2),
        }
    }

    /// Rows `idx` of the batch, in that order.
    pub fn select(&self, idx: &[usize]) -> Tensor {
        match self {
            Tensor::Flat(a) => Tensor::Flat(a.select(Axis(0), idx)),
            Tensor::Seq(a) => Tensor::Seq(a.select(Axis(1), idx)),
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Tensor::Flat(a) => a.iter().all(|v| v.is_finite()),
            Tensor::Seq(a) => a.iter().all(|v| v.is_finite()),
        }
    }

    fn into_flat(self) -> Array2<f64> {
        match self {
            Tensor::Flat(a) => a,
            Tensor::Seq(a) => seq_to_flat(a.view()),
        }
    }
}

/// `(T, B, F)` → `(B, T·F)`.
fn seq_to_flat(a: ArrayView3<f64>) -> Array2<f64> {
    let (t, b, f) = a.dim();
    a.permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((b, t * f))
        .expect("standard layout")
}

fn flat_to_seq(a: ArrayView2<f64>, t: usize, f: usize) -> Array3<f64> {
    let b = a.nrows();
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order((b, t, f))
        .expect("standard layout")
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
}

#[derive(Debug, Clone)]
enum Cache {
    Dense(DenseCache),
    Lstm(LstmCache),
    Gru(GruCache),
    Dropout(Option<Tensor>),
    Flatten(Shape),
    Repeat,
    TimeDist(DenseCache, usize, usize),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    training: bool,
    output: Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    plan: Vec<LayerPlan>,
    offsets: Vec<usize>,
    pub params: Vec<Array2<f64>>,
}

/// Mean squared error over all elements.
pub fn mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!("{:?}", pred.dim()), format!("{:?}", target.dim())));
    }
    let n = pred.len().max(1) as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub mse: f64,
    pub penalty: f64,
    pub grads: Vec<Array2<f64>>,
}

impl LossGrad {
    pub fn total(&self) -> f64 {
        self.mse + self.penalty
    }
}

fn glorot(rng: &mut dyn RngCore, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

impl Model {
    /// Zero-initialised parameters.
    pub fn zeros(spec: ModelSpec) -> Result<Model> {
        let plan = spec.plan()?;
        let mut offsets = Vec::with_capacity(plan.len());
        let mut params = Vec::new();
        for p in &plan {
            offsets.push(params.len());
            params.extend(p.params.iter().map(|&s| Array2::zeros(s)));
        }
        Ok(Model {
            spec,
            plan,
            offsets,
            params,
        })
    }

    /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
    pub fn init(spec: ModelSpec, rng: &mut dyn RngCore) -> Result<Model> {
        let mut model = Model::zeros(spec)?;
        for (li, layer) in model.spec.layers.iter().enumerate() {
            let off = model.offsets[li];
            let shapes = &model.plan[li].params;
            if shapes.is_empty() {
                continue;
            }
            let (r, c) = shapes[0];
            model.params[off] = glorot(rng, r, c);
            if let LayerSpec::Lstm { units, .. } = *layer {
                model.params[off + 1].slice_mut(s![.., ..units]).fill(1.0);
            }
        }
        Ok(model)
    }

    pub fn from_params(spec: ModelSpec, params: Vec<Array2<f64>>) -> Result<Model> {
        let mut model = Model::zeros(spec)?;
        if params.len() != model.params.len() {
            return Err(Error::shape(
                format!("{} parameter tensors", model.params.len()),
                format!("{}", params.len()),
            ));
        }
        for (i, (have, want)) in params.iter().zip(&model.params).enumerate() {
            if have.dim() != want.dim() {
                return Err(Error::shape(format!("tensor {i} {:?}", want.dim()), format!("{:?}", have.dim())));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.spec).expect("validated at construction")
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params.iter().map(|p| p.dim()).collect()
    }

    fn layer_params(&self, li: usize) -> &[Array2<f64>] {
        let n = self.plan[li].params.len();
        &self.params[self.offsets[li]..self.offsets[li] + n]
    }

    /// Inference: dropout off, deterministic.
    pub fn predict(&self, x: &Tensor) -> Result<Array2<f64>> {
        Ok(self.forward(x, None)?.0)
    }

    /// Forward pass; passing an rng selects training mode (dropout masks drawn from it).
    pub fn forward(&self, x: &Tensor, mut rng: Option<&mut dyn RngCore>) -> Result<(Array2<f64>, Tape)> {
        if x.shape() != self.spec.input {
            return Err(Error::shape(format!("input {}", self.spec.input), format!("{}", x.shape())));
        }
        let training = rng.is_some();
        let mut cur = x.clone();
        let mut state: Option<(Array2<f64>, Array2<f64>)> = None;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for (li, layer) in self.spec.layers.iter().enumerate() {
            let p = self.layer_params(li);
            let (next, cache) = match (layer, cur) {
                (LayerSpec::Dense { activation, .. }, Tensor::Flat(a)) => {
                    let (y, c) = dense_forward(p[0].view(), p[1].view(), a.view(), *activation)?;
                    (Tensor::Flat(y), Cache::Dense(c))
                }
                (
                    LayerSpec::Lstm {
                        return_sequences,
                        return_state,
                        initial_state,
                        ..
                    },
                    Tensor::Seq(a),
                ) => {
                    let init = if *initial_state { state.take() } else { None };
                    let c = lstm_forward(
                        p[0].view(),
                        p[1].view(),
                        a.view(),
                        init.as_ref().map(|(h, c)| (h.view(), c.view())),
                    )?;
                    if *return_state {
                        state = Some((c.last_h().to_owned(), c.last_c().to_owned()));
                    }
                    let out = if *return_sequences {
                        Tensor::Seq(c.outputs().to_owned())
                    } else {
                        Tensor::Flat(c.last_h().to_owned())
                    };
                    (out, Cache::Lstm(c))
                }
                (LayerSpec::Gru { return_sequences, .. }, Tensor::Seq(a)) => {
                    let c = gru_forward(p[0].view(), p[1].view(), p[2].view(), a.view(), None)?;
                    let out = if *return_sequences {
                        Tensor::Seq(c.outputs().to_owned())
                    } else {
                        Tensor::Flat(c.last_h().to_owned())
                    };
                    (out, Cache::Gru(c))
                }
                (LayerSpec::Dropout { rate }, t) => match rng.as_deref_mut() {
                    Some(r) if *rate > 0.0 => {
                        let keep = 1.0 / (1.0 - rate);
                        let mut draw = |_: ()| if r.gen::<f64>() < *rate { 0.0 } else { keep };
                        let (out, mask) = match t {
                            Tensor::Flat(a) => {
                                let m = Array2::from_shape_fn(a.dim(), |_| draw(()));
                                (Tensor::Flat(&a * &m), Tensor::Flat(m))
                            }
                            Tensor::Seq(a) => {
                                let m = Array3::from_shape_fn(a.dim(), |_| draw(()));
                                (Tensor::Seq(&a * &m), Tensor::Seq(m))
                            }
                        };
                        (out, Cache::Dropout(Some(mask)))
                    }
                    _ => (t, Cache::Dropout(None)),
                },
                (LayerSpec::Flatten, t) => {
                    let shape = t.shape();
                    (Tensor::Flat(t.into_flat()), Cache::Flatten(shape))
                }
                (LayerSpec::RepeatVector { n }, Tensor::Flat(a)) => {
                    let rep = a.broadcast((*n, a.nrows(), a.ncols())).expect("broadcast").to_owned();
                    (Tensor::Seq(rep), Cache::Repeat)
                }
                (LayerSpec::TimeDistributedDense { activation, .. }, Tensor::Seq(a)) => {
                    let (t, b, f) = a.dim();
                    let a2 = super::standard(a).into_shape_with_order((t * b, f)).expect("standard layout");
                    let (y, c) = dense_forward(p[0].view(), p[1].view(), a2.view(), *activation)?;
                    let units = y.ncols();
                    let y3 = super::standard(y).into_shape_with_order((t, b, units)).expect("standard layout");
                    (Tensor::Seq(y3), Cache::TimeDist(c, t, b))
                }
                (layer, t) => {
                    return Err(Error::shape(
                        format!("valid input for {}", layer.kind_name()),
                        t.shape().to_string(),
                    ))
                }
            };
            if !next.all_finite() {
                return Err(Error::NonFinite(format!("output of layer {li} ({})", layer.kind_name())));
            }
            caches.push(cache);
            cur = next;
        }
        let output = cur.shape();
        Ok((
            cur.into_flat(),
            Tape {
                caches,
                training,
                output,
            },
        ))
    }

    /// `λ·ΣW²` over regularised dense layers.
    pub fn l2_penalty(&self) -> f64 {
        self.spec
            .layers
            .iter()
            .enumerate()
            .map(|(li, l)| match l {
                LayerSpec::Dense { l2, .. } => l2_penalty(self.layer_params(li)[0].view(), *l2),
                _ => 0.0,
            })
            .sum()
    }

    /// Gradients of the loss for every parameter tensor, given `d_out = ∂L/∂output`.
    /// In training mode the L2 gradient is included.
    pub fn backward(&self, tape: &Tape, d_out: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        let mut grads: Vec<Array2<f64>> = self.params.iter().map(|p| Array2::zeros(p.dim())).collect();
        let mut d = match tape.output {
            Shape::Flat(_) => Tensor::Flat(d_out.to_owned()),
            Shape::Seq(t, f) => Tensor::Seq(flat_to_seq(d_out, t, f)),
        };
        let mut state_grad: Option<(Array2<f64>, Array2<f64>)> = None;
        for li in (0..self.spec.layers.len()).rev() {
            let layer = &self.spec.layers[li];
            let p = self.layer_params(li);
            let off = self.offsets[li];
            d = match (layer, &tape.caches[li], d) {
                (LayerSpec::Dense { activation, l2, .. }, Cache::Dense(c), Tensor::Flat(g)) => {
                    let lambda = if tape.training { *l2 } else { 0.0 };
                    let (dx, dw, db) = dense_backward(p[0].view(), c, *activation, lambda, g.view());
                    grads[off] = dw;
                    grads[off + 1] = db;
                    Tensor::Flat(dx)
                }
                (
                    LayerSpec::Lstm {
                        return_sequences,
                        return_state,
                        initial_state,
                        ..
                    },
                    Cache::Lstm(c),
                    g,
                ) => {
                    let (steps, batch, _) = c.x.dim();
                    let units = c.h.dim().2;
                    let mut dh = if *return_sequences {
                        match g {
                            Tensor::Seq(g) => g,
                            Tensor::Flat(_) => return Err(Error::shape("sequence gradient", "flat")),
                        }
                    } else {
                        let mut dh = Array3::zeros((steps, batch, units));
                        match g {
                            Tensor::Flat(g) => dh.index_axis_mut(Axis(0), steps - 1).assign(&g),
                            Tensor::Seq(_) => return Err(Error::shape("flat gradient", "sequence")),
                        }
                        dh
                    };
                    let mut dc_last = None;
                    if *return_state {
                        if let Some((gh, gc)) = state_grad.take() {
                            let mut last = dh.index_axis_mut(Axis(0), steps - 1);
                            last += &gh;
                            dc_last = Some(gc);
                        }
                    }
                    let lg = lstm_backward(p[0].view(), c, dh.view(), dc_last.as_ref().map(|a| a.view()));
                    if *initial_state {
                        state_grad = Some((lg.dh0, lg.dc0));
                    }
                    grads[off] = lg.dw;
                    grads[off + 1] = lg.db;
                    Tensor::Seq(lg.dx)
                }
                (LayerSpec::Gru { return_sequences, .. }, Cache::Gru(c), g) => {
                    let (steps, batch, _) = c.x.dim();
                    let units = c.h.dim().2;
                    let dh = match (return_sequences, g) {
                        (true, Tensor::Seq(g)) => g,
                        (false, Tensor::Flat(g)) => {
                            let mut dh = Array3::zeros((steps, batch, units));
                            dh.index_axis_mut(Axis(0), steps - 1).assign(&g);
                            dh
                        }
                        _ => return Err(Error::shape("gradient matching gru output", "other")),
                    };
                    let gg = gru_backward(p[0].view(), c, dh.view());
                    grads[off] = gg.dw;
                    grads[off + 1] = gg.db_in;
                    grads[off + 2] = gg.db_rec;
                    Tensor::Seq(gg.dx)
                }
                (LayerSpec::Dropout { .. }, Cache::Dropout(mask), g) => match (mask, g) {
                    (None, g) => g,
                    (Some(Tensor::Flat(m)), Tensor::Flat(g)) => Tensor::Flat(g * m),
                    (Some(Tensor::Seq(m)), Tensor::Seq(g)) => Tensor::Seq(g * m),
                    _ => return Err(Error::shape("dropout mask shape", "gradient shape")),
                },
                (LayerSpec::Flatten, Cache::Flatten(shape), Tensor::Flat(g)) => match *shape {
                    Shape::Flat(_) => Tensor::Flat(g),
                    Shape::Seq(t, f) => Tensor::Seq(flat_to_seq(g.view(), t, f)),
                },
                (LayerSpec::RepeatVector { .. }, Cache::Repeat, Tensor::Seq(g)) => Tensor::Flat(g.sum_axis(Axis(0))),
                (LayerSpec::TimeDistributedDense { activation, .. }, Cache::TimeDist(c, t, b), Tensor::Seq(g)) => {
                    let units = g.dim().2;
                    let g2 = super::standard(g).into_shape_with_order((t * b, units)).expect("standard layout");
                    let (dx, dw, db) = dense_backward(p[0].view(), c, *activation, 0.0, g2.view());
                    grads[off] = dw;
                    grads[off + 1] = db;
                    let f = dx.ncols();
                    Tensor::Seq(super::standard(dx).into_shape_with_order((*t, *b, f)).expect("standard layout"))
                }
                _ => return Err(Error::shape("gradient matching layer output", layer.kind_name())),
            };
        }
        Ok(grads)
    }

    /// MSE (+ L2 penalty) and its gradient on one batch in training mode.
    pub fn loss_and_grad(&self, x: &Tensor, y: ArrayView2<f64>, rng: &mut dyn RngCore) -> Result<LossGrad> {
        let (pred, tape) = self.forward(x, Some(rng))?;
        let mse_value = mse(pred.view(), y)?;
        let scale = 2.0 / pred.len().max(1) as f64;
        let d_out = (&pred - &y) * scale;
        let grads = self.backward(&tape, d_out.view())?;
        Ok(LossGrad {
            mse: mse_value,
            penalty: self.l2_penalty(),
            grads,
        })
    }

    /// Inference-mode MSE, batched to bound memory.
    pub fn evaluate_mse(&self, x: &Tensor, y: ArrayView2<f64>, batch: usize) -> Result<f64> {
        let pred = self.predict_batched(x, batch)?;
        mse(pred.view(), y)
    }

    pub fn predict_batched(&self, x: &Tensor, batch: usize) -> Result<Array2<f64>> {
        let n = x.batch();
        let width = self.spec.output_width()?;
        let mut out = Array2::zeros((n, width));
        let batch = batch.max(1);
        let mut start = 0;
        while start < n {
            let end = (start + batch).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let p = self.predict(&x.select(&idx))?;
            out.slice_mut(s![start..end, ..]).assign(&p);
            start = end;
        }
        Ok(out)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Denominator floor for the relative error so that exactly-zero gradients
/// compare on absolute error instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-7;

/// Compares analytic gradients of the training loss with central differences.
/// Dropout masks are reproduced by reseeding the rng for every evaluation.
pub fn gradient_check(model: &Model, x: &Tensor, y: ArrayView2<f64>, seed: u64, eps: f64) -> Result<GradCheck> {
    let loss_at = |m: &Model| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, _) = m.forward(x, Some(&mut rng))?;
        Ok(mse(pred.view(), y)? + m.l2_penalty())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let analytic = model.loss_and_grad(x, y, &mut rng)?.grads;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (k, g) in analytic.iter().enumerate() {
        for (idx, &a) in g.indexed_iter() {
            let orig = probe.params[k][idx];
            probe.params[k][idx] = orig + eps;
            let up = loss_at(&probe)?;
            probe.params[k][idx] = orig - eps;
            let down = loss_at(&probe)?;
            probe.params[k][idx] = orig;
            let n = (up - down) / (2.0 * eps);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        checked,
    })
}
