use std::collections::VecDeque;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::RngCore;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Largest feature index referenced, if any.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per node; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

pub(crate) fn check_training_data(x: ArrayView2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 || y.is_empty() {
        return Err(Error::invalid("cannot fit on empty data"));
    }
    if x.nrows() != y.len() {
        return Err(Error::shape(format!("{} targets", x.nrows()), format!("{}", y.len())));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("at least one feature is required"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }
    Ok(())
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Candidate {
    /// Gains within a relative 1e-12 count as ties and go to the lower
    /// `(feature, threshold)`, so rounding in the sums cannot make the choice
    /// depend on row order.
    fn beats(&self, other: &Candidate) -> bool {
        let tol = 1e-12 * self.gain.abs().max(other.gain.abs());
        if (self.gain - other.gain).abs() <= tol {
            (self.feature, self.threshold) < (other.feature, other.threshold)
        } else {
            self.gain > other.gain
        }
    }
}

/// Best threshold on one feature by the weighted between-child variance
/// `n_L·n_R/n·(ȳ_L − ȳ_R)²`.
fn best_threshold(
    x: ArrayView2<f64>,
    y: &[f64],
    rows: &[usize],
    feature: usize,
    min_leaf: usize,
    pairs: &mut Vec<(f64, f64)>,
) -> Option<Candidate> {
    pairs.clear();
    pairs.extend(rows.iter().map(|&r| (x[[r, feature]], y[r])));
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut left_sum = 0.0;
    let mut best: Option<Candidate> = None;
    for i in 1..n {
        left_sum += pairs[i - 1].1;
        if i < min_leaf || n - i < min_leaf || pairs[i - 1].0 == pairs[i].0 {
            continue;
        }
        let (nl, nr) = (i as f64, (n - i) as f64);
        let diff = left_sum / nl - (total - left_sum) / nr;
        let gain = nl * nr / n as f64 * diff * diff;
        let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
        let mid = lo + (hi - lo) / 2.0;
        let c = Candidate {
            feature,
            threshold: if mid < hi { mid } else { lo },
            gain,
        };
        if best.as_ref().is_none_or(|b| c.beats(b)) {
            best = Some(c);
        }
    }
    best
}

enum Slot {
    Leaf(f64),
    Split(usize, f64, usize, usize),
}

/// Greedy regression tree grown level by level, so a deeper limit on the same
/// data and rng only refines the shallower tree.
pub fn fit_tree(x: ArrayView2<f64>, y: &[f64], cfg: &TreeConfig, rng: &mut dyn RngCore) -> Result<TreeNode> {
    check_training_data(x, y)?;
    fit_rows(x, y, (0..y.len()).collect(), cfg, rng)
}

pub(crate) fn fit_rows(
    x: ArrayView2<f64>,
    y: &[f64],
    rows: Vec<usize>,
    cfg: &TreeConfig,
    rng: &mut dyn RngCore,
) -> Result<TreeNode> {
    let p = x.ncols();
    let m = cfg.max_features.unwrap_or(p).clamp(1, p);
    let min_leaf = cfg.min_samples_leaf.max(1);
    let mut slots: Vec<Option<Slot>> = vec![None];
    let mut queue = VecDeque::from([(0usize, rows, 0usize)]);
    let mut pairs = Vec::new();
    while let Some((id, rows, depth)) = queue.pop_front() {
        if rows.iter().all(|&r| y[r] == y[rows[0]]) {
            slots[id] = Some(Slot::Leaf(y[rows[0]]));
            continue;
        }
        let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
        if depth >= cfg.max_depth || rows.len() < 2 * min_leaf {
            slots[id] = Some(Slot::Leaf(mean));
            continue;
        }
        let features = sample(rng, p, m);
        let mut best: Option<Candidate> = None;
        for f in features.iter() {
            if let Some(c) = best_threshold(x, y, &rows, f, min_leaf, &mut pairs) {
                if best.as_ref().is_none_or(|b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best else {
            slots[id] = Some(Slot::Leaf(mean));
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| x[[r, best.feature]] <= best.threshold);
        let (l, r) = (slots.len(), slots.len() + 1);
        slots.push(None);
        slots.push(None);
        slots[id] = Some(Slot::Split(best.feature, best.threshold, l, r));
        queue.push_back((l, left, depth + 1));
        queue.push_back((r, right, depth + 1));
    }
    Ok(assemble(&mut slots, 0))
}

fn assemble(slots: &mut [Option<Slot>], id: usize) -> TreeNode {
    match slots[id].take().expect("every slot is filled") {
        Slot::Leaf(value) => TreeNode::Leaf { value },
        Slot::Split(feature, threshold, l, r) => TreeNode::Split {
            feature,
            threshold,
            left: Box::new(assemble(slots, l)),
            right: Box::new(assemble(slots, r)),
        },
    }
}

pub(crate) fn check_width(x: ArrayView2<f64>, features: usize) -> Result<()> {
    if x.ncols() != features {
        return Err(Error::shape(format!("{features} features"), format!("{}", x.ncols())));
    }
    Ok(())
}
