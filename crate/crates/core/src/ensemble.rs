//! Top-K ensembles and aleatoric / epistemic variance decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{GaussianPrediction, Network};
use crate::pod::PodBasis;
use crate::real::Real;
use crate::search::CatalogRecord;

pub const DEFAULT_K: usize = 10;

/// The `k` successful records with the smallest validation NLL, ties by earlier id.
pub fn select_top_k(records: &[CatalogRecord], k: usize) -> Result<Vec<CatalogRecord>> {
    let mut ok: Vec<&CatalogRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if k == 0 || ok.len() < k {
        return Err(Error::InsufficientRecords {
            needed: k.max(1),
            available: ok.len(),
        });
    }
    ok.sort_by(|a, b| {
        let (x, y) = (a.valid_nll.unwrap(), b.valid_nll.unwrap());
        x.total_cmp(&y).then(a.id.cmp(&b.id))
    });
    Ok(ok.into_iter().take(k).cloned().collect())
}

/// Members with their loaded networks.
#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    pub records: Vec<CatalogRecord>,
    pub networks: Vec<Network<T>>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(records: Vec<CatalogRecord>, networks: Vec<Network<T>>) -> Result<Self> {
        if records.is_empty() || records.len() != networks.len() {
            return Err(Error::dims(records.len().max(1), networks.len(), "ensemble members"));
        }
        for (i, r) in records.iter().enumerate() {
            if records[..i].iter().any(|o| o.id == r.id) {
                return Err(Error::Contract(format!("duplicate ensemble member {}", r.id)));
            }
        }
        Ok(Self { records, networks })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn predict(&self, x: &[T]) -> Result<Vec<GaussianPrediction<T>>> {
        self.networks.iter().map(|n| n.forward_gaussian(x)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `1/(K-1)` on the spread of member means.
    #[default]
    Sample,
    /// `1/K`, the exact variance of the equally weighted mixture.
    Population,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyDecomposition<T> {
    pub mean: Vec<T>,
    pub aleatoric: Vec<T>,
    pub epistemic: Vec<T>,
    pub total: Vec<T>,
    pub weighting: Weighting,
}

fn decompose<T: Real>(preds: &[GaussianPrediction<T>], weighting: Weighting) -> Result<UncertaintyDecomposition<T>> {
    let k = preds.len();
    let min = if weighting == Weighting::Sample { 2 } else { 1 };
    if k < min {
        return Err(Error::InsufficientRecords { needed: min, available: k });
    }
    let n = preds[0].len();
    for p in preds {
        if p.len() != n {
            return Err(Error::dims(n, p.len(), "member prediction length"));
        }
    }
    let kt = T::from_usize_lossy(k);
    let denom = match weighting {
        Weighting::Sample => T::from_usize_lossy(k - 1),
        Weighting::Population => kt,
    };
    let mut out = UncertaintyDecomposition {
        mean: vec![T::zero(); n],
        aleatoric: vec![T::zero(); n],
        epistemic: vec![T::zero(); n],
        total: vec![T::zero(); n],
        weighting,
    };
    for i in 0..n {
        let mu = preds.iter().map(|p| p.mean[i]).sum::<T>() / kt;
        let ale = preds.iter().map(|p| p.variance[i]).sum::<T>() / kt;
        let epi = preds.iter().map(|p| (p.mean[i] - mu).powi(2)).sum::<T>() / denom;
        out.mean[i] = mu;
        out.aleatoric[i] = ale;
        out.epistemic[i] = epi;
        out.total[i] = ale + epi;
    }
    Ok(out)
}

/// Epistemic term with the `1/(K-1)` estimator. Needs `K >= 2`.
pub fn decompose_sample<T: Real>(preds: &[GaussianPrediction<T>]) -> Result<UncertaintyDecomposition<T>> {
    decompose(preds, Weighting::Sample)
}

/// Exact mixture variance (`1/K` weighting). Needs `K >= 1`.
pub fn decompose_population<T: Real>(preds: &[GaussianPrediction<T>]) -> Result<UncertaintyDecomposition<T>> {
    decompose(preds, Weighting::Population)
}

/// How modal standard deviations combine in physical space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `sqrt(sum_j s_j^2 v_j(x)^2)`, modes treated as independent.
    #[default]
    Quadrature,
    /// `|sum_j s_j v_j(x)|`.
    AbsSum,
}

/// Pointwise standard deviation field from modal variances.
pub fn project_uncertainty_physical<T: Real>(
    modal_variance: &[T],
    basis: &PodBasis<T>,
    projection: Projection,
) -> Result<Vec<T>> {
    if modal_variance.len() != basis.mode_count() {
        return Err(Error::dims(basis.mode_count(), modal_variance.len(), "modal variances"));
    }
    if modal_variance.iter().any(|v| *v < T::zero()) {
        return Err(Error::Domain("negative modal variance".into()));
    }
    let mut acc = vec![T::zero(); basis.state_dim()];
    for (j, &s2) in modal_variance.iter().enumerate() {
        let s = s2.sqrt();
        for (a, &v) in acc.iter_mut().zip(basis.mode(j)) {
            match projection {
                Projection::Quadrature => *a += s2 * v * v,
                Projection::AbsSum => *a += s * v,
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|a| match projection {
            Projection::Quadrature => a.sqrt(),
            Projection::AbsSum => a.abs(),
        })
        .collect())
}

/// Pointwise `1/(K-1)` variance across member fields.
pub fn pointwise_sample_variance<T: Real>(fields: &[Vec<T>]) -> Result<Vec<T>> {
    let k = fields.len();
    if k < 2 {
        return Err(Error::InsufficientRecords { needed: 2, available: k });
    }
    let n = fields[0].len();
    if let Some(f) = fields.iter().find(|f| f.len() != n) {
        return Err(Error::dims(n, f.len(), "member field length"));
    }
    let kt = T::from_usize_lossy(k);
    Ok((0..n)
        .map(|i| {
            let m = fields.iter().map(|f| f[i]).sum::<T>() / kt;
            fields.iter().map(|f| (f[i] - m).powi(2)).sum::<T>() / T::from_usize_lossy(k - 1)
        })
        .collect())
}

/// Epistemic variance field from each member's mean coefficients pushed through the basis.
pub fn epistemic_physical_field<T: Real>(member_coeffs: &[Vec<T>], basis: &PodBasis<T>) -> Result<Vec<T>> {
    let fields = member_coeffs
        .iter()
        .map(|a| basis.reconstruct(a))
        .collect::<Result<Vec<_>>>()?;
    pointwise_sample_variance(&fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(m: f64, v: f64) -> GaussianPrediction<f64> {
        GaussianPrediction::new(vec![m], vec![v]).unwrap()
    }

    #[test]
    fn analytic_two_members() {
        let p = [pred(0.0, 1.0), pred(2.0, 1.0)];
        let s = decompose_sample(&p).unwrap();
        assert_eq!((s.mean[0], s.aleatoric[0], s.epistemic[0], s.total[0]), (1.0, 1.0, 2.0, 3.0));
        let q = decompose_population(&p).unwrap();
        assert_eq!(q.total[0], 2.0);
    }

    #[test]
    fn degenerate_cases() {
        let one = [pred(0.5, 0.3)];
        assert!(decompose_sample(&one).is_err());
        let d = decompose_population(&one).unwrap();
        assert_eq!((d.epistemic[0], d.total[0]), (0.0, 0.3));
        let same = [pred(1.0, 0.4), pred(1.0, 0.4), pred(1.0, 0.4)];
        let d = decompose_sample(&same).unwrap();
        assert_eq!(d.epistemic[0], 0.0);
        assert!((d.aleatoric[0] - 0.4).abs() < 1e-15);
    }
}
