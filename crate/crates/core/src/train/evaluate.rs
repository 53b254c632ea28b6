use crate::analysis::{error_summary, ErrorSummary, HistogramBins};
use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::neural::Model;

use super::dataset::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summary: ErrorSummary,
    /// De-normalized predictions, one per test row.
    pub predictions: Vec<f64>,
}

/// Predicts the test set, maps predictions back through `target_scaler`, and
/// scores them against the raw targets.
pub fn evaluate(
    model: &Model,
    test: &Dataset,
    target_scaler: &Scaler,
    name: &str,
    bins: HistogramBins,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let scaled = model.predict_batched(&test.x, 256)?;
    let predictions = target_scaler.invert(scaled.view())?.column(0).to_vec();
    let summary = error_summary(name, &test.actual, &predictions, bins)?;
    Ok(Evaluation { summary, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, LayerSpec, ModelKind, ModelSpec, Shape, Tensor};
    use ndarray::{array, Array2};

    /// `y = b`: a single linear unit with zero weight.
    fn constant_model(b: f64) -> Model {
        let spec = ModelSpec {
            kind: ModelKind::DenseMlp,
            input: Shape::Flat(2),
            layers: vec![LayerSpec::dense(1, Activation::Linear)],
        };
        Model::from_params(spec, vec![Array2::zeros((2, 1)), array![[b]]]).unwrap()
    }

    fn dataset(actual: &[f64], scaler: &Scaler) -> Dataset {
        let n = actual.len();
        let y = Array2::from_shape_fn((n, 1), |(i, _)| scaler.apply_value(0, actual[i]));
        Dataset::new(Tensor::Flat(Array2::ones((n, 2))), y, actual.to_vec()).unwrap()
    }

    #[test]
    fn memorized_constant_has_zero_error() {
        let scaler = Scaler {
            shift: vec![2.0],
            scale: vec![4.0],
        };
        let test = dataset(&[3.0; 5], &scaler);
        let ev = evaluate(&constant_model(0.25), &test, &scaler, "const", HistogramBins::default()).unwrap();
        assert_eq!(ev.summary.p95, 0.0);
        assert_eq!(ev.predictions, vec![3.0; 5]);
    }

    #[test]
    fn identity_and_fitted_scalers_agree_on_normalized_data() {
        let actual = [0.0, 0.25, 0.5, 1.0];
        let fitted = Scaler::fit_series(&actual).unwrap();
        assert_eq!(fitted, Scaler::identity(1));
        let test = dataset(&actual, &fitted);
        let model = constant_model(0.4);
        let a = evaluate(&model, &test, &fitted, "m", HistogramBins::default()).unwrap();
        let b = evaluate(&model, &test, &Scaler::identity(1), "m", HistogramBins::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summary.excluded, 1);
    }

    #[test]
    fn empty_test_set() {
        let test = dataset(&[], &Scaler::identity(1));
        assert!(evaluate(&constant_model(0.0), &test, &Scaler::identity(1), "m", HistogramBins::default()).is_err());
    }
}
