use crate::error::{Error, Result};
use crate::signal::relative_error;

/// Uniform histogram over `[0, width·count)`; larger values land in the last bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBins {
    pub width: f64,
    pub count: usize,
}

impl Default for HistogramBins {
    fn default() -> Self {
        HistogramBins {
            width: 1.0,
            count: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: HistogramBins) -> Result<Histogram> {
        if !(bins.width > 0.0) || bins.count == 0 {
            return Err(Error::invalid("histogram needs a positive width and bin count"));
        }
        let edges = (0..=bins.count).map(|i| i as f64 * bins.width).collect();
        let mut counts = vec![0; bins.count];
        for &v in values {
            let idx = ((v / bins.width).floor().max(0.0) as usize).min(bins.count - 1);
            counts[idx] += 1;
        }
        Ok(Histogram { edges, counts })
    }
}

/// Relative-error statistics for one model on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub name: String,
    /// Per-row relative errors (%), rows with `actual = 0` left out.
    pub errors: Vec<f64>,
    pub excluded: usize,
    pub mean: f64,
    pub p95: f64,
    pub histogram: Histogram,
}

impl ErrorSummary {
    pub fn count(&self) -> usize {
        self.errors.len()
    }
}

/// Nearest-rank percentile of an ascending slice: the value at rank ⌈p·n⌉.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::invalid("percentile of an empty set"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("percentile fraction {p} outside (0, 1]")));
    }
    let rank = ((p * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

pub fn error_summary(
    name: &str,
    actuals: &[f64],
    predictions: &[f64],
    bins: HistogramBins,
) -> Result<ErrorSummary> {
    if actuals.len() != predictions.len() {
        return Err(Error::shape(
            format!("{} predictions", actuals.len()),
            format!("{} predictions", predictions.len()),
        ));
    }
    let mut errors = Vec::with_capacity(actuals.len());
    let mut excluded = 0;
    for (&a, &p) in actuals.iter().zip(predictions) {
        if a == 0.0 {
            excluded += 1;
            continue;
        }
        errors.push(relative_error(a, p)?);
    }
    if errors.is_empty() {
        return Err(Error::invalid(format!(
            "all {excluded} rows excluded (actual = 0); nothing to summarise"
        )));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let p95 = nearest_rank(&sorted, 0.95)?;
    let histogram = Histogram::build(&errors, bins)?;
    Ok(ErrorSummary {
        name: name.to_string(),
        errors,
        excluded,
        mean,
        p95,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_predictions() {
        let a = [1.0, 2.0, 3.0];
        let s = error_summary("m", &a, &a, HistogramBins::default()).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.p95, 0.0);
        assert_eq!(s.histogram.counts[0], 3);
        assert_eq!(s.histogram.counts.iter().sum::<usize>(), 3);
    }

    #[test]
    fn nearest_rank_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&v, 0.95).unwrap(), 95.0);
        assert_eq!(nearest_rank(&[4.2], 0.95).unwrap(), 4.2);
        // errors built through the summary path as well
        let actual = vec![100.0; 100];
        let pred: Vec<f64> = (1..=100).map(|i| 100.0 - i as f64).collect();
        let s = error_summary("m", &actual, &pred, HistogramBins::default()).unwrap();
        assert_abs_diff_eq!(s.p95, 95.0, epsilon = 1e-9);
    }

    #[test]
    fn reference_third_harmonic_mean() {
        let act = [3.71, 3.78, 5.08, 9.31, 6.67, 6.51, 5.06, 5.42, 3.93, 2.84];
        let pred = [3.78, 3.75, 4.84, 9.49, 5.07, 6.61, 4.86, 5.31, 3.74, 2.85];
        // oracle: relative error by hand per pair
        let oracle: f64 = act
            .iter()
            .zip(&pred)
            .map(|(a, p): (&f64, &f64)| (a - p).abs() / a * 100.0)
            .sum::<f64>()
            / 10.0;
        let s = error_summary("seq2seq", &act, &pred, HistogramBins::default()).unwrap();
        assert_abs_diff_eq!(s.mean, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mean, 4.6031, epsilon = 0.001);
    }

    #[test]
    fn zero_actuals_excluded() {
        let s = error_summary("m", &[0.0, 2.0, 0.0], &[1.0, 1.0, 0.0], HistogramBins::default())
            .unwrap();
        assert_eq!(s.excluded, 2);
        assert_eq!(s.count(), 1);
        assert_eq!(s.mean, 50.0);
        assert!(error_summary("m", &[0.0], &[1.0], HistogramBins::default()).is_err());
        assert!(error_summary("m", &[1.0], &[1.0, 2.0], HistogramBins::default()).is_err());
    }

    #[test]
    fn overflow_goes_to_last_bin() {
        let h = Histogram::build(&[0.5, 1.5, 99.0], HistogramBins { width: 1.0, count: 3 }).unwrap();
        assert_eq!(h.counts, vec![1, 1, 1]);
        assert_eq!(h.edges, vec![0.0, 1.0, 2.0, 3.0]);
    }
}
