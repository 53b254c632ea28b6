use ndarray::{s, Array2, Array3, Axis};

use crate::data::features::{harmonic_series, make_tabular_features};
use crate::data::{split_sizes, AnalyzerRecord, HarmonicOrder, Line, Scaler, SplitFractions};
use crate::error::{Error, Result};
use crate::neural::Tensor;

/// Model inputs, scaled targets, and the raw targets they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    /// Scaled targets `(N, 1)`.
    pub y: Array2<f64>,
    /// Unscaled targets, used for relative errors.
    pub actual: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Tensor, y: Array2<f64>, actual: Vec<f64>) -> Result<Dataset> {
        if x.batch() != y.nrows() || y.nrows() != actual.len() {
            return Err(Error::shape(
                format!("{} rows everywhere", x.batch()),
                format!("{} targets and {} actuals", y.nrows(), actual.len()),
            ));
        }
        Ok(Dataset { x, y, actual })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(idx),
            y: self.y.select(Axis(0), idx),
            actual: idx.iter().map(|&i| self.actual[i]).collect(),
        }
    }

    /// Every `stride`-th row, starting with the first.
    pub fn strided(&self, stride: usize) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).step_by(stride.max(1)).collect();
        self.select(&idx)
    }
}

/// Chronological train/validation/test sets for one line and harmonic order,
/// with scalers fitted on the training part only.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub input_scaler: Scaler,
    pub target_scaler: Scaler,
    /// Index into the record list of each test target.
    pub test_rows: Vec<usize>,
}

/// Builds datasets whose targets are records `window..n`, whatever the input
/// kind, so windowed and tabular models are scored on the same time points.
/// Windowed inputs hold the previous `window` values of the target series;
/// tabular inputs are the five time-of-day and line-current features.
pub fn prepare(
    records: &[AnalyzerRecord],
    line: Line,
    order: HarmonicOrder,
    sequence: bool,
    window: usize,
    fractions: SplitFractions,
) -> Result<PreparedData> {
    build(records, line, order, sequence, window, fractions, None)
}

/// Like [`prepare`], scaling with the given scalers instead of fitting new
/// ones, so a stored model sees inputs scaled exactly as in training.
#[allow(clippy::too_many_arguments)]
pub fn prepare_with_scalers(
    records: &[AnalyzerRecord],
    line: Line,
    order: HarmonicOrder,
    sequence: bool,
    window: usize,
    fractions: SplitFractions,
    input_scaler: &Scaler,
    target_scaler: &Scaler,
) -> Result<PreparedData> {
    build(records, line, order, sequence, window, fractions, Some((input_scaler, target_scaler)))
}

fn build(
    records: &[AnalyzerRecord],
    line: Line,
    order: HarmonicOrder,
    sequence: bool,
    window: usize,
    fractions: SplitFractions,
    fixed: Option<(&Scaler, &Scaler)>,
) -> Result<PreparedData> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    if records.len() <= window {
        return Err(Error::invalid(format!(
            "{} records are too few for window {window}",
            records.len()
        )));
    }
    let series = harmonic_series(records, line, order);
    let n = records.len() - window;
    let (a, b, _) = split_sizes(n, fractions)?;
    if a == 0 {
        return Err(Error::invalid("training split is empty"));
    }
    let targets = &series[window..];
    let target_scaler = match fixed {
        Some((_, t)) => t.clone(),
        None => Scaler::fit_series(&targets[..a])?,
    };
    if target_scaler.features() != 1 {
        return Err(Error::shape("1-feature target scaler", format!("{} features", target_scaler.features())));
    }
    let scaled_targets = Array2::from_shape_fn((n, 1), |(i, _)| target_scaler.apply_value(0, targets[i]));
    let (x, input_scaler) = if sequence {
        let inputs = Array3::from_shape_fn((n, window, 1), |(i, t, _)| target_scaler.apply_value(0, series[i + t]));
        (Tensor::from_windows(inputs.view()), target_scaler.clone())
    } else {
        let (raw, _) = make_tabular_features(&records[window..], line, order);
        let scaler = match fixed {
            Some((i, _)) => i.clone(),
            None => Scaler::fit(raw.slice(s![..a, ..]))?,
        };
        (Tensor::Flat(scaler.apply(raw.view())?), scaler)
    };
    let all = Dataset::new(x, scaled_targets, targets.to_vec())?;
    let part = |r: std::ops::Range<usize>| all.select(&r.collect::<Vec<_>>());
    Ok(PreparedData {
        train: part(0..a),
        val: part(a..a + b),
        test: part(a + b..n),
        input_scaler,
        target_scaler,
        test_rows: (window + a + b..records.len()).collect(),
    })
}
