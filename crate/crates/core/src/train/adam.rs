use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Array2<f64>]) -> AdamState {
        let zeros: Vec<Array2<f64>> = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched if any
/// gradient is non-finite or shapes disagree.
pub fn adam_step(
    params: &mut [Array2<f64>],
    grads: &[Array2<f64>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            format!("{} gradient tensors", params.len()),
            format!("{} (state {})", grads.len(), state.m.len()),
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.dim() != g.dim() {
            return Err(Error::shape(format!("{:?}", p.dim()), format!("{:?}", g.dim())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
        });
        if lr != 0.0 {
            Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![array![[1.5, -2.0]]];
        let before = p.clone();
        let mut st = AdamState::new(&p);
        for _ in 0..3 {
            adam_step(&mut p, &[array![[0.0, 0.0]]], &mut st, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_on_square_moves_by_lr() {
        // f(w) = w², g = 2 at w = 1. m̂ = g, v̂ = g², so Δ = lr·g/(|g| + ε).
        let mut p = vec![array![[1.0]]];
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &[array![[2.0]]], &mut st, &cfg).unwrap();
        let expected = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8);
        assert!((p[0][[0, 0]] - expected).abs() < 1e-15);
        assert!((1.0 - p[0][[0, 0]] - 1e-3).abs() < 1e-11);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = vec![array![[3.0, -4.0]]];
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        for _ in 0..2000 {
            let g = p[0].mapv(|w| 2.0 * w);
            adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
        }
        assert!(p[0].iter().all(|w| w.abs() < 1e-3), "{:?}", p[0]);
    }

    #[test]
    fn non_finite_gradient_rejected_without_update() {
        let mut p = vec![array![[1.0]]];
        let mut st = AdamState::new(&p);
        let err = adam_step(&mut p, &[array![[f64::NAN]]], &mut st, &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p[0][[0, 0]], 1.0);
        assert_eq!(st.t, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![array![[1.0, 2.0]]];
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &[array![[1.0]]], &mut st, &AdamConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![array![[0.3, 0.7], [1.0, -1.0]]];
            let mut st = AdamState::new(&p);
            for k in 0..10 {
                let g = p[0].mapv(|w| (w * k as f64).sin());
                adam_step(&mut p, &[g], &mut st, &AdamConfig::default()).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
