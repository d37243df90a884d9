//! Target transform and per-column standardization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;

/// Divisor floor used when a column has (near) zero spread.
pub const STD_GUARD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("{0}")]
    Domain(String),
    #[error("standardizer has {expected} columns, matrix has {got}")]
    Shape { expected: usize, got: usize },
    #[error("matrix is already standardized")]
    AlreadyStandardized,
}

/// `log10(count + 1)`, so zero counts map to zero.
pub fn log10p(count: i64) -> Result<f64, PreprocessError> {
    if count < 0 {
        return Err(PreprocessError::Domain(format!("count must be non-negative, got {count}")));
    }
    Ok((count as f64 + 1.0).log10())
}

/// Inverse of [`log10p`] before rounding: `10^y − 1`, clamped at zero.
pub fn inv_log10p_raw(y: f64) -> f64 {
    (10f64.powf(y) - 1.0).max(0.0)
}

/// Inverse of [`log10p`], rounded to the nearest whole count.
pub fn inv_log10p(y: f64) -> u64 {
    let raw = inv_log10p_raw(y);
    if raw.is_finite() {
        raw.round() as u64
    } else if raw > 0.0 {
        u64::MAX
    } else {
        0
    }
}

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_standardizer(x: &FeatureMatrix) -> Result<Standardizer, PreprocessError> {
    if x.n_rows() < 2 {
        return Err(PreprocessError::Domain(format!("need at least 2 rows to fit a standardizer, got {}", x.n_rows())));
    }
    let n = x.n_rows() as f64;
    let m = x.n_cols();
    let mut mean = vec![0.0; m];
    for row in x.rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = vec![0.0; m];
    for row in x.rows() {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - mu;
            *acc += d * d;
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    Ok(Standardizer { columns: x.columns().to_vec(), mean, std })
}

impl Standardizer {
    pub fn n_cols(&self) -> usize {
        self.mean.len()
    }

    fn check_width(&self, got: usize) -> Result<(), PreprocessError> {
        if got != self.n_cols() {
            return Err(PreprocessError::Shape { expected: self.n_cols(), got });
        }
        Ok(())
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, PreprocessError> {
        if x.is_standardized() {
            return Err(PreprocessError::AlreadyStandardized);
        }
        self.check_width(x.n_cols())?;
        let mut data = Vec::with_capacity(x.as_flat().len());
        for row in x.rows() {
            data.extend(self.scale(row));
        }
        let out = FeatureMatrix::from_flat(x.columns().to_vec(), data).expect("shape preserved");
        Ok(out.with_standardized_flag(true))
    }

    /// Scale a single raw row.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        self.check_width(row.len())?;
        Ok(self.scale(row).collect())
    }

    fn scale<'a>(&'a self, row: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, sd))| (v - mu) / sd.max(STD_GUARD))
    }
}

pub fn apply_standardizer(s: &Standardizer, x: &FeatureMatrix) -> Result<FeatureMatrix, PreprocessError> {
    s.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(vec!["a".into()], values.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn log10p_examples() {
        assert_eq!(log10p(0).unwrap(), 0.0);
        assert_eq!(log10p(9).unwrap(), 1.0);
        // log10(801)
        assert!((log10p(800).unwrap() - 2.903_632_516_084_237_6).abs() < 1e-9);
        assert!(log10p(-1).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inv_log10p(0.0), 0);
        assert_eq!(inv_log10p(1.0), 9);
        assert_eq!(inv_log10p(2.0), 99);
        assert_eq!(inv_log10p(-0.3), 0);
    }

    #[test]
    fn standardizer_examples() {
        let s = fit_standardizer(&col(&[1.0, 3.0])).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (2.0, 1.0));
        let s = fit_standardizer(&col(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (5.0, 0.0));
        assert_eq!(s.apply(&col(&[5.0, 5.0, 5.0])).unwrap().column(0), vec![0.0; 3]);
        let s = fit_standardizer(&col(&[2.0, 4.0, 9.0])).unwrap();
        assert_eq!(s.mean[0], 5.0);
        assert!((s.std[0] - (26.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert_eq!(s.apply(&col(&[5.0])).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn fitted_columns_have_unit_moments() {
        let x = col(&[0.3, -1.0, 7.5, 2.25, 4.0, 4.0]);
        let z = fit_standardizer(&x).unwrap().apply(&x).unwrap();
        let again = fit_standardizer(&z).unwrap();
        assert!(again.mean[0].abs() < 1e-9);
        assert!((again.std[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(fit_standardizer(&col(&[])), Err(PreprocessError::Domain(_))));
        assert!(matches!(fit_standardizer(&col(&[1.0])), Err(PreprocessError::Domain(_))));
        let s = fit_standardizer(&col(&[1.0, 2.0])).unwrap();
        let wide = FeatureMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(s.apply(&wide).unwrap_err(), PreprocessError::Shape { expected: 1, got: 2 });
        let once = s.apply(&col(&[1.0, 2.0])).unwrap();
        assert_eq!(s.apply(&once).unwrap_err(), PreprocessError::AlreadyStandardized);
    }

    #[test]
    fn serializes_as_json() {
        let s = fit_standardizer(&col(&[2.0, 4.0, 9.0])).unwrap();
        let back: Standardizer = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn log_transform_round_trips(c in 0i64..=1_000_000) {
            let raw = inv_log10p_raw(log10p(c).unwrap());
            prop_assert!((raw - c as f64).abs() <= 1e-9 * (c as f64).max(1.0));
            prop_assert_eq!(inv_log10p(log10p(c).unwrap()), c as u64);
        }

        #[test]
        fn shift_moves_mean_only(values in proptest::collection::vec(-100.0f64..100.0, 2..20), shift in -100.0f64..100.0) {
            let base = fit_standardizer(&col(&values)).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let moved = fit_standardizer(&col(&shifted)).unwrap();
            // tolerance relative to the magnitude of the stored values
            let scale = shifted.iter().chain(&values).fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!((moved.mean[0] - base.mean[0] - shift).abs() <= 1e-12 * scale);
            prop_assert!((moved.std[0] - base.std[0]).abs() <= 1e-12 * scale);
        }
    }
}
