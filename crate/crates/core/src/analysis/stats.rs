use crate::error::{Error, Result};

/// Sample autocorrelation for lags `0..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    pub coefficients: Vec<f64>,
}

impl AcfResult {
    pub fn max_lag(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn at(&self, lag: usize) -> f64 {
        self.coefficients[lag]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `r(k) = Σ (x_t − x̄)(x_{t+k} − x̄) / Σ (x_t − x̄)²`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    if series.len() <= max_lag {
        return Err(Error::invalid(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let m = mean(series);
    let centred: Vec<f64> = series.iter().map(|x| x - m).collect();
    let denom: f64 = centred.iter().map(|d| d * d).sum();
    if !(denom > 0.0) {
        return Err(Error::domain("autocorrelation of a zero-variance series"));
    }
    let mut coefficients = Vec::with_capacity(max_lag + 1);
    coefficients.push(1.0);
    for k in 1..=max_lag {
        let num: f64 = centred.iter().zip(&centred[k..]).map(|(a, b)| a * b).sum();
        coefficients.push(num / denom);
    }
    Ok(AcfResult { coefficients })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} values", x.len()), format!("{} values", y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two pairs"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::domain("pearson of a zero-variance input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    #[test]
    fn lag_zero_is_one() {
        let acf = autocorrelation(&[1.0, 3.0, 2.0, 5.0, 4.0], 3).unwrap();
        assert_eq!(acf.at(0), 1.0);
        assert_eq!(acf.max_lag(), 3);
    }

    #[test]
    fn sinusoid_one_period() {
        let period = 40;
        let x: Vec<f64> = (0..period * 500)
            .map(|t| (2.0 * PI * t as f64 / period as f64).sin())
            .collect();
        let acf = autocorrelation(&x, period).unwrap();
        assert_abs_diff_eq!(acf.at(period), 1.0, epsilon = 0.01);
        assert_abs_diff_eq!(acf.at(period / 2), -1.0, epsilon = 0.01);
    }

    #[test]
    fn white_noise_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let acf = autocorrelation(&x, 100).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let inside = (1..=100).filter(|&k| acf.at(k).abs() < bound).count();
        assert!(inside as f64 >= 0.95 * 100.0, "{inside}/100 inside");
    }

    #[test]
    fn acf_errors() {
        assert!(autocorrelation(&[1.0; 10], 2).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.5, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-12);
        assert!(pearson(&x, &[1.0; 5]).is_err());
        assert!(pearson(&x, &[1.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn acf_reversal_symmetric(x in proptest::collection::vec(-5.0f64..5.0, 12..60)) {
            let lag = 8;
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-6));
            let fwd = autocorrelation(&x, lag).unwrap();
            let rev: Vec<f64> = x.iter().rev().copied().collect();
            let bwd = autocorrelation(&rev, lag).unwrap();
            for k in 0..=lag {
                prop_assert!((fwd.at(k) - bwd.at(k)).abs() < 1e-9);
            }
        }

        #[test]
        fn pearson_affine_invariant(
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
            a in 0.1f64..10.0, b in -10.0f64..10.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = match pearson(&x, &y) { Ok(r) => r, Err(_) => return Ok(()) };
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = pearson(&xt, &y).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
        }
    }
}
