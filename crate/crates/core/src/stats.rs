//! Descriptive statistics shared by the null models and the reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Scalar;

pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let total: T = values.iter().copied().sum();
    Some(total / T::of_usize(values.len()))
}

/// Mean of the defined entries, `None` if nothing is defined.
pub fn mean_defined<T: Scalar>(values: impl IntoIterator<Item = Option<T>>) -> Option<T> {
    let mut total = T::zero();
    let mut n = 0usize;
    for v in values.into_iter().flatten() {
        total += v;
        n += 1;
    }
    (n > 0).then(|| total / T::of_usize(n))
}

/// Product-moment correlation coefficient.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "pearson: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::arg("pearson: need at least two observations"));
    }
    let mx = mean(x).unwrap();
    let my = mean(y).unwrap();
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(Error::UndefinedCorrelation(
            "one of the series has zero variance".into(),
        ));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Quantile of already sorted data, inclusive linear interpolation
/// (position `p * (n - 1)` between order statistics).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> Option<T> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn quantile<T: Scalar>(values: &[T], p: f64) -> Option<T> {
    let sorted = sorted_copy(values);
    quantile_sorted(&sorted, p)
}

fn sorted_copy<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in statistics input"));
    sorted
}

/// Five-number summary plus mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub min: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub max: T,
    pub mean: T,
}

pub fn summarize<T: Scalar>(values: &[T]) -> Option<Summary<T>> {
    if values.is_empty() {
        return None;
    }
    let sorted = sorted_copy(values);
    Some(Summary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25)?,
        median: quantile_sorted(&sorted, 0.5)?,
        q3: quantile_sorted(&sorted, 0.75)?,
        max: sorted[sorted.len() - 1],
        mean: mean(&sorted)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_closed_form() {
        // x = (1,2,3), y = (1,2,4): sxy = 3, sxx = 2, syy = 14/3
        let expected = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 0.982).abs() < 1e-3);
    }

    #[test]
    fn pearson_extremes_and_errors() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson::<f64>(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&x, &[2.0, 2.0, 2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&x, &[1.0]).is_err());
    }

    #[test]
    fn pearson_f32() {
        let r: f32 = pearson(&[1.0f32, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.98198).abs() < 1e-4);
    }

    #[test]
    fn inclusive_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(quantile(&v, 0.25), Some(2.75));
        assert_eq!(quantile(&v, 0.5), Some(4.5));
        assert_eq!(quantile(&v, 0.75), Some(6.25));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(8.0));
        assert_eq!(quantile::<f64>(&[], 0.5), None);
    }

    #[test]
    fn summary_of_small_sets() {
        let s = summarize(&[2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.mean), (2.0, 2.0, 2.0, 2.0, 2.0, 2.0));
        let s = summarize(&[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(s.median, 0.0);
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.q1, -0.5);
    }
}
