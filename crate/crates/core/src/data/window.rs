use std::ops::Range;

use ndarray::{s, Array2, Array3, Axis};

use super::split::{split_sizes, SplitFractions};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 100;

/// Past-window samples: `inputs[i] = series[i..i+W]`, `targets[i] = series[i+W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Shape `(N, W, 1)`.
    pub inputs: Array3<f64>,
    /// Shape `(N, 1)`.
    pub targets: Array2<f64>,
    pub window: usize,
}

pub fn make_windows(series: &[f64], window: usize) -> Result<WindowedDataset> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    if series.len() <= window {
        return Err(Error::invalid(format!(
            "series of length {} is too short for window {window}",
            series.len()
        )));
    }
    let n = series.len() - window;
    let inputs = Array3::from_shape_fn((n, window, 1), |(i, t, _)| series[i + t]);
    let targets = Array2::from_shape_fn((n, 1), |(i, _)| series[i + window]);
    Ok(WindowedDataset {
        inputs,
        targets,
        window,
    })
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, range: Range<usize>) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs.slice(s![range.clone(), .., ..]).to_owned(),
            targets: self.targets.slice(s![range, ..]).to_owned(),
            window: self.window,
        }
    }

    /// Every `stride`-th sample, starting with the first.
    pub fn strided(&self, stride: usize) -> WindowedDataset {
        let stride = stride.max(1);
        let idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        WindowedDataset {
            inputs: self.inputs.select(Axis(0), &idx),
            targets: self.targets.select(Axis(0), &idx),
            window: self.window,
        }
    }

    /// Chronological train/val/test split.
    pub fn split(&self, fractions: SplitFractions) -> Result<(Self, Self, Self)> {
        let (a, b, _) = split_sizes(self.len(), fractions)?;
        Ok((
            self.slice(0..a),
            self.slice(a..a + b),
            self.slice(a + b..self.len()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_and_typical_lengths() {
        let series: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let ds = make_windows(&series, 100).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.targets[[0, 0]], 100.0);

        let series: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let ds = make_windows(&series, 100).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.inputs[[0, 99, 0]], 99.0);
        assert_eq!(ds.targets[[0, 0]], 100.0);
    }

    #[test]
    fn constant_series_targets() {
        let ds = make_windows(&[2.5; 130], 100).unwrap();
        assert!(ds.targets.iter().all(|&t| t == 2.5));
    }

    #[test]
    fn too_short() {
        assert!(make_windows(&[1.0; 100], 100).is_err());
        assert!(make_windows(&[1.0; 10], 0).is_err());
    }

    #[test]
    fn strided_keeps_alignment() {
        let series: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ds = make_windows(&series, 10).unwrap().strided(7);
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.targets[[1, 0]], 17.0);
        assert_eq!(ds.inputs[[1, 9, 0]], 16.0);
    }

    proptest! {
        #[test]
        fn last_input_precedes_target(series in proptest::collection::vec(-10.0f64..10.0, 2..80), w in 1usize..20) {
            prop_assume!(series.len() > w);
            let ds = make_windows(&series, w).unwrap();
            prop_assert_eq!(ds.len(), series.len() - w);
            for i in 0..ds.len() {
                prop_assert_eq!(ds.inputs[[i, w - 1, 0]], series[i + w - 1]);
                prop_assert_eq!(ds.targets[[i, 0]], series[i + w]);
            }
        }
    }
}
