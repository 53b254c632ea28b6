use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid(format!("split fractions must be positive: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must sum to 1: {parts:?}")));
        }
        Ok(())
    }
}

/// Train and val sizes are floored; the remainder goes to test.
pub fn split_sizes(n: usize, fractions: SplitFractions) -> Result<(usize, usize, usize)> {
    fractions.validate()?;
    if n < 3 {
        return Err(Error::invalid(format!("cannot split {n} rows three ways")));
    }
    // guard the floor against products like 0.7·100 = 69.99999…
    let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
    let train = floor(fractions.train);
    let val = floor(fractions.val);
    Ok((train, val, n - train - val))
}

/// Chronological (unshuffled) split.
pub fn split<T: Clone>(rows: &[T], fractions: SplitFractions) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, b, _) = split_sizes(rows.len(), fractions)?;
    Ok((
        rows[..a].to_vec(),
        rows[a..a + b].to_vec(),
        rows[a + b..].to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes() {
        let f = SplitFractions::default();
        assert_eq!(split_sizes(100, f).unwrap(), (70, 15, 15));
        assert_eq!(split_sizes(10, f).unwrap(), (7, 1, 2));
        assert!(split_sizes(2, f).is_err());
    }

    #[test]
    fn bad_fractions() {
        let f = SplitFractions {
            train: 0.8,
            val: 0.15,
            test: 0.15,
        };
        assert!(split_sizes(100, f).is_err());
        let f = SplitFractions {
            train: 1.0,
            val: 0.0,
            test: 0.0,
        };
        assert!(split_sizes(100, f).is_err());
    }

    #[test]
    fn chronology() {
        let ts: Vec<i64> = (0..50).map(|i| i * 30).collect();
        let (tr, va, te) = split(&ts, SplitFractions::default()).unwrap();
        assert!(tr.iter().max() < va.iter().min());
        assert!(va.iter().max() < te.iter().min());
    }

    proptest! {
        #[test]
        fn preserves_rows(n in 3usize..500) {
            let rows: Vec<usize> = (0..n).collect();
            let (a, b, c) = split(&rows, SplitFractions::default()).unwrap();
            prop_assert_eq!(a.len() + b.len() + c.len(), n);
            let joined: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
            prop_assert_eq!(joined, rows);
        }
    }
}
