use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;

/// RMSE over a set of windows at one lead time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RmseSummary {
    /// Root of the mean squared error pooled over all windows and points.
    pub pooled: f64,
    /// Mean over windows of each window's RMSE.
    pub window_mean: f64,
}

/// `pred[w]` and `truth[w]` are flattened fields for window `w`; `points`
/// restricts to flattened positions (all when `None`).
pub fn rmse<T: Real>(pred: &[Vec<T>], truth: &[Vec<T>], points: Option<&[usize]>) -> Result<RmseSummary> {
    if pred.len() != truth.len() {
        return Err(Error::dims(truth.len(), pred.len(), "window count"));
    }
    if pred.is_empty() {
        return Err(Error::Domain("no windows".into()));
    }
    let all: Vec<usize>;
    let pts = match points {
        Some(p) => p,
        None => {
            all = (0..truth[0].len()).collect();
            &all
        }
    };
    if pts.is_empty() {
        return Err(Error::Domain("empty region".into()));
    }
    let mut pooled = 0.0;
    let mut window_mean = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::dims(t.len(), p.len(), "field length"));
        }
        let mut se = 0.0;
        for &i in pts {
            let d = p.get(i).ok_or(Error::dims(i + 1, p.len(), "region point"))?.as_f64() - t[i].as_f64();
            se += d * d;
        }
        pooled += se;
        window_mean += (se / pts.len() as f64).sqrt();
    }
    Ok(RmseSummary {
        pooled: (pooled / (pts.len() * pred.len()) as f64).sqrt(),
        window_mean: window_mean / pred.len() as f64,
    })
}

/// Per-point RMSE over time, one value per flattened position.
pub fn pointwise_rmse<T: Real>(pred: &[Vec<T>], truth: &[Vec<T>]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::dims(truth.len().max(1), pred.len(), "window count"));
    }
    let n = truth[0].len();
    let mut acc = vec![0.0; n];
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != n || t.len() != n {
            return Err(Error::dims(n, p.len(), "field length"));
        }
        for ((a, x), y) in acc.iter_mut().zip(p).zip(t) {
            *a += (x.as_f64() - y.as_f64()).powi(2);
        }
    }
    Ok(acc.into_iter().map(|a| (a / pred.len() as f64).sqrt()).collect())
}

/// `||pred - truth|| / ||truth||` per field, averaged over the set.
pub fn relative_l2<T: Real>(pred: &[Vec<T>], truth: &[Vec<T>]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::dims(truth.len().max(1), pred.len(), "field count"));
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::dims(t.len(), p.len(), "field length"));
        }
        let num: f64 = p.iter().zip(t).map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2)).sum();
        let den: f64 = t.iter().map(|b| b.as_f64().powi(2)).sum();
        if den == 0.0 {
            return Err(Error::Domain("zero truth field".into()));
        }
        total += (num / den).sqrt();
    }
    Ok(total / pred.len() as f64)
}

pub const DEFAULT_BINS: usize = 50;

/// Uniform bins over `[0, upper]`; the last bin is closed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub upper: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize, upper: f64) -> Result<Self> {
        if bins == 0 || !(upper > 0.0) {
            return Err(Error::Domain(format!("histogram needs bins > 0 and upper > 0, got {bins}, {upper}")));
        }
        let mut counts = vec![0; bins];
        for &v in values {
            if !(0.0..=upper).contains(&v) {
                return Err(Error::Domain(format!("value {v} outside [0, {upper}]")));
            }
            let b = ((v / upper) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        Ok(Self { upper, counts })
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n).map(|i| self.upper * i as f64 / n as f64).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Histograms of several RMSE sets on shared edges `[0, max over all]`.
pub fn shared_histograms(sets: &[&[f64]], bins: usize) -> Result<Vec<Histogram>> {
    let upper = sets
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0, f64::max);
    let upper = if upper > 0.0 { upper } else { 1.0 };
    sets.iter().map(|s| Histogram::new(s, bins, upper)).collect()
}

/// Signed per-bin `ensemble - member` counts.
pub fn histogram_diff(ensemble: &Histogram, member: &Histogram) -> Result<Vec<i64>> {
    if ensemble.counts.len() != member.counts.len() || ensemble.upper != member.upper {
        return Err(Error::Contract("histograms do not share bin edges".into()));
    }
    Ok(ensemble
        .counts
        .iter()
        .zip(&member.counts)
        .map(|(&a, &b)| a as i64 - b as i64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        let truth = vec![vec![1.0f64, 2.0, 3.0]; 2];
        let r = rmse(&truth, &truth, None).unwrap();
        assert_eq!((r.pooled, r.window_mean), (0.0, 0.0));
        let biased: Vec<Vec<f64>> = truth.iter().map(|t| t.iter().map(|v| v + 1.0).collect()).collect();
        let r = rmse(&biased, &truth, Some(&[0, 2])).unwrap();
        assert_eq!((r.pooled, r.window_mean), (1.0, 1.0));
        assert!(rmse(&biased, &truth, Some(&[])).is_err());
    }

    #[test]
    fn pooled_differs_from_window_mean() {
        let truth = vec![vec![0.0f64], vec![0.0]];
        let pred = vec![vec![1.0f64], vec![3.0]];
        let r = rmse(&pred, &truth, None).unwrap();
        assert!((r.pooled - 5.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.window_mean, 2.0);
    }

    #[test]
    fn relative_l2_examples() {
        let truth = vec![vec![1.0f64, -2.0], vec![0.5, 0.5]];
        assert_eq!(relative_l2(&truth, &truth).unwrap(), 0.0);
        let doubled: Vec<Vec<f64>> = truth.iter().map(|t| t.iter().map(|v| 2.0 * v).collect()).collect();
        assert!((relative_l2(&doubled, &truth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_conservation() {
        let v = [0.0, 0.1, 0.5, 1.0, 1.0];
        let h = shared_histograms(&[&v, &v], DEFAULT_BINS).unwrap();
        assert_eq!(h[0].total(), 5);
        assert_eq!(h[0].counts[49], 2);
        assert!(histogram_diff(&h[0], &h[1]).unwrap().iter().all(|&d| d == 0));
        assert_eq!(h[0].edges().len(), 51);
    }
}
