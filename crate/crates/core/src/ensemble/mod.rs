//! Regression trees, bagged random forests and a squared-error gradient
//! booster.

mod booster;
mod forest;
mod io;
mod tree;

pub use booster::{fit_gradient_booster, BoosterConfig, BoosterFit, BoosterModel};
pub use forest::{fit_random_forest, ForestConfig, ForestModel};
pub use io::{EnsembleModel, FORMAT_VERSION};
pub use tree::{fit_tree, TreeConfig, TreeNode};
