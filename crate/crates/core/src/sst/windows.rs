use crate::error::{Error, Result};
use crate::nn::Samples;
use crate::real::Real;

pub const DEFAULT_TAU: usize = 8;

/// Sliding windows over a series of coefficient vectors: `tau + 1` input steps,
/// `tau` target steps, one sample per admissible start.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset<T> {
    pub tau: usize,
    pub dim: usize,
    /// First input step of each sample.
    pub starts: Vec<usize>,
    pub samples: Samples<T>,
}

pub fn window_count(len: usize, tau: usize) -> Result<usize> {
    if len < 2 * tau + 1 {
        return Err(Error::InsufficientRecords {
            needed: 2 * tau + 1,
            available: len,
        });
    }
    Ok(len - 2 * tau)
}

pub fn build_forecast_windows<T: Real>(series: &[Vec<T>], tau: usize) -> Result<WindowedDataset<T>> {
    if tau == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    let count = window_count(series.len(), tau)?;
    let dim = series[0].len();
    if let Some(v) = series.iter().find(|v| v.len() != dim) {
        return Err(Error::dims(dim, v.len(), "series vector"));
    }
    let mut inputs = Vec::with_capacity(count * (tau + 1) * dim);
    let mut targets = Vec::with_capacity(count * tau * dim);
    for s in 0..count {
        for v in &series[s..=s + tau] {
            inputs.extend_from_slice(v);
        }
        for v in &series[s + tau + 1..=s + 2 * tau] {
            targets.extend_from_slice(v);
        }
    }
    Ok(WindowedDataset {
        tau,
        dim,
        starts: (0..count).collect(),
        samples: Samples::new(inputs, targets, (tau + 1) * dim, tau * dim)?,
    })
}

/// Per-component affine scaling fitted on a training split.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<T: Real>(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InsufficientRecords { needed: 1, available: 0 });
        }
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v.as_f64() / n as f64;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v.as_f64() - m).powi(2) / n as f64;
            }
        }
        let scale = var.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<T: Real>(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                let k = i % self.dim();
                T::lit((v.as_f64() - self.mean[k]) / self.scale[k])
            })
            .collect()
    }

    /// Inverts `apply` on a mean vector whose length is a multiple of `dim`.
    pub fn invert_mean<T: Real>(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                let k = i % self.dim();
                T::lit(v.as_f64() * self.scale[k] + self.mean[k])
            })
            .collect()
    }

    pub fn invert_variance<T: Real>(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| T::lit(v.as_f64() * self.scale[i % self.dim()].powi(2)))
            .collect()
    }
}
