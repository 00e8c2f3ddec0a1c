//! Correlation and calibration metrics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Pearson correlation, `None` when either input has zero variance or the
/// inputs are shorter than two samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = mean(&x[..n]);
    let my = mean(&y[..n]);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Calibration metrics in the usual building-model form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    /// `100 · mean(pred − actual) / mean(actual)`
    pub mbe_percent: f64,
    /// `100 · rmse / mean(actual)`
    pub cv_rmse_percent: f64,
}

pub fn metrics(predicted: &[f64], actual: &[f64]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Schema(alloc::format!(
            "{} predictions for {} actual values",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::UndefinedMetric("no rows to evaluate"));
    }
    let mean_actual = mean(actual);
    if mean_actual == 0.0 {
        return Err(Error::UndefinedMetric("mean of actual values is zero"));
    }
    let n = actual.len() as f64;
    let (mut bias, mut sq) = (0.0, 0.0);
    for (p, a) in predicted.iter().zip(actual) {
        let e = p - a;
        bias += e;
        sq += e * e;
    }
    let rmse = math::sqrt(sq / n);
    Ok(Metrics {
        rmse,
        mbe_percent: 100.0 * (bias / n) / mean_actual,
        cv_rmse_percent: 100.0 * rmse / mean_actual,
    })
}

/// Average absolute percentage difference for one integer wet-bulb bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WetBulbBin {
    pub t_wb_f: i32,
    pub rows: usize,
    pub avg_diff_percent: f64,
}

/// Groups rows by wet-bulb rounded to the nearest °F and averages
/// `100 · |pred − actual| / |actual|` inside each bin. Rows with a zero
/// actual value are skipped.
pub fn wet_bulb_bins(predicted: &[f64], actual: &[f64], t_wb: &[f64]) -> Vec<WetBulbBin> {
    let mut bins: BTreeMap<i32, (usize, f64)> = BTreeMap::new();
    for ((p, a), wb) in predicted.iter().zip(actual).zip(t_wb) {
        if *a == 0.0 || !wb.is_finite() {
            continue;
        }
        let entry = bins.entry(math::round(*wb) as i32).or_default();
        entry.0 += 1;
        entry.1 += 100.0 * math::abs(p - a) / math::abs(*a);
    }
    bins.into_iter()
        .map(|(t_wb_f, (rows, total))| WetBulbBin {
            t_wb_f,
            rows,
            avg_diff_percent: total / rows as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_extremes() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[3.0; 4]), None);
    }

    #[test]
    fn perfect_predictions() {
        let a = [10.0, 20.0, 30.0];
        let m = metrics(&a, &a).unwrap();
        assert_eq!((m.rmse, m.mbe_percent, m.cv_rmse_percent), (0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_one_percent_bias() {
        let a = [10.0, 20.0, 30.0, 45.0];
        let p: Vec<f64> = a.iter().map(|v| v * 1.01).collect();
        assert!((metrics(&p, &a).unwrap().mbe_percent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_row_toy() {
        let m = metrics(&[110.0, 90.0], &[100.0, 100.0]).unwrap();
        assert!(m.mbe_percent.abs() < 1e-12);
        assert!((m.cv_rmse_percent - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_is_undefined() {
        assert!(matches!(
            metrics(&[1.0, -1.0], &[1.0, -1.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn bins_by_rounded_wet_bulb() {
        let bins = wet_bulb_bins(&[110.0, 95.0, 50.0], &[100.0, 100.0, 50.0], &[65.2, 64.6, 70.0]);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].t_wb_f, 65);
        assert_eq!(bins[0].rows, 2);
        assert!((bins[0].avg_diff_percent - 7.5).abs() < 1e-12);
        assert_eq!(bins[1].avg_diff_percent, 0.0);
    }
}
