use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{check_training_data, check_width, fit_rows, TreeConfig, TreeNode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoosterConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for BoosterConfig {
    fn default() -> Self {
        BoosterConfig {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

/// `F(x) = init + Σ lr·tree_t(x)` under squared error.
#[derive(Debug, Clone, PartialEq)]
pub struct BoosterModel {
    pub init: f64,
    pub learning_rate: f64,
    pub stages: Vec<TreeNode>,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoosterFit {
    pub model: BoosterModel,
    /// Training MSE after the initial mean and after each stage.
    pub train_mse: Vec<f64>,
}

fn mean(values: &[f64]) -> f64 {
    if values.iter().all(|&v| v == values[0]) {
        values[0]
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn mse(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn fit_gradient_booster(x: ArrayView2<f64>, y: &[f64], cfg: &BoosterConfig) -> Result<BoosterFit> {
    check_training_data(x, y)?;
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) {
        return Err(Error::invalid(format!("learning rate {} outside (0, 1]", cfg.learning_rate)));
    }
    let (n, p) = x.dim();
    let init = mean(y);
    let mut f = vec![init; n];
    let mut train_mse = vec![mse(y, &f)];
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stages = Vec::with_capacity(cfg.n_estimators);
    for _ in 0..cfg.n_estimators {
        let residual: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let tree = fit_rows(x, &residual, (0..n).collect(), &tree_cfg, &mut rng)?;
        for (fi, row) in f.iter_mut().zip(x.rows()) {
            *fi += cfg.learning_rate * tree.predict_row(&row.to_vec());
        }
        train_mse.push(mse(y, &f));
        stages.push(tree);
    }
    Ok(BoosterFit {
        model: BoosterModel {
            init,
            learning_rate: cfg.learning_rate,
            stages,
            n_features: p,
        },
        train_mse,
    })
}

impl BoosterModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut f = self.init;
        for t in &self.stages {
            f += self.learning_rate * t.predict_row(row);
        }
        f
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(x, self.n_features)?;
        Ok(x.rows()
            .into_iter()
            .map(|r| self.predict_row(&r.to_vec()))
            .collect())
    }
}
