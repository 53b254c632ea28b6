use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{check_training_data, check_width, fit_rows, TreeConfig, TreeNode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `ceil(p / 3)`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 100,
            max_depth: 8,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_estimators(n_estimators: usize, seed: u64) -> Self {
        ForestConfig {
            n_estimators,
            seed,
            ..ForestConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
}

/// Bagged regression trees. Tree `i` draws its bootstrap sample and feature
/// subsets from ChaCha stream `i` of the configured seed.
pub fn fit_random_forest(x: ArrayView2<f64>, y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    check_training_data(x, y)?;
    if cfg.n_estimators == 0 {
        return Err(Error::invalid("a forest needs at least one tree"));
    }
    let (n, p) = x.dim();
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: Some(cfg.max_features.unwrap_or(p.div_ceil(3))),
    };
    let trees = (0..cfg.n_estimators)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_rows(x, y, rows, &tree_cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { trees, n_features: p })
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(x, self.n_features)?;
        Ok(x.rows()
            .into_iter()
            .map(|r| self.predict_row(&r.to_vec()))
            .collect())
    }
}
