use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Per-feature min-max scaling to `[0, 1]`, fitted on training rows only.
///
/// A feature with no spread gets `scale = 1` and `shift = mean`, so it maps
/// to zero and inverts back to the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn identity(features: usize) -> Scaler {
        Scaler {
            shift: vec![0.0; features],
            scale: vec![1.0; features],
        }
    }

    pub fn fit(rows: ArrayView2<f64>) -> Result<Scaler> {
        if rows.nrows() == 0 {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        let mut shift = Vec::with_capacity(rows.ncols());
        let mut scale = Vec::with_capacity(rows.ncols());
        for col in rows.axis_iter(Axis(1)) {
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::NonFinite("scaler input".into()));
            }
            if hi > lo {
                shift.push(lo);
                scale.push(hi - lo);
            } else {
                shift.push(col.sum() / col.len() as f64);
                scale.push(1.0);
            }
        }
        Ok(Scaler { shift, scale })
    }

    pub fn fit_series(series: &[f64]) -> Result<Scaler> {
        let view = ArrayView2::from_shape((series.len(), 1), series)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Scaler::fit(view)
    }

    pub fn features(&self) -> usize {
        self.shift.len()
    }

    pub fn apply_value(&self, feature: usize, x: f64) -> f64 {
        (x - self.shift[feature]) / self.scale[feature]
    }

    pub fn invert_value(&self, feature: usize, z: f64) -> f64 {
        z * self.scale[feature] + self.shift[feature]
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.features() {
            return Err(Error::shape(
                format!("{} features", self.features()),
                format!("{cols} features"),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(rows.ncols())?;
        let mut out = rows.to_owned();
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = self.apply_value(j, *v);
        }
        Ok(out)
    }

    pub fn invert(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(rows.ncols())?;
        let mut out = rows.to_owned();
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = self.invert_value(j, *v);
        }
        Ok(out)
    }
}
