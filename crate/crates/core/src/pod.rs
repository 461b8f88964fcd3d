//! Proper orthogonal decomposition of snapshot data.
//!
//! The basis is the leading left singular vectors of the mean-subtracted
//! snapshot matrix `S`, which are the leading eigenvectors of `S S^T`; the
//! eigenvalues are the squared singular values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::real::{dot, Real};

pub const MAGIC: &[u8; 4] = b"POD1";
pub const DEFAULT_ENERGY: f64 = 0.90;
pub const DEFAULT_MAX_MODES: usize = 50;

/// Mean-subtracted snapshots, one contiguous column per snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix<T> {
    columns: Vec<T>,
    mean: Vec<T>,
    n: usize,
    t: usize,
}

impl<T: Real> SnapshotMatrix<T> {
    pub fn from_snapshots(snapshots: &[Vec<T>]) -> Result<Self> {
        let t = snapshots.len();
        if t == 0 {
            return Err(Error::Domain("no snapshots".into()));
        }
        let n = snapshots[0].len();
        if n == 0 {
            return Err(Error::Domain("empty snapshot".into()));
        }
        let mut mean = vec![T::zero(); n];
        for s in snapshots {
            if s.len() != n {
                return Err(Error::dims(n, s.len(), "snapshot length"));
            }
            for (m, &v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        let inv = T::one() / T::from_usize_lossy(t);
        mean.iter_mut().for_each(|m| *m *= inv);
        let mut columns = Vec::with_capacity(n * t);
        for s in snapshots {
            columns.extend(s.iter().zip(&mean).map(|(&v, &m)| v - m));
        }
        Ok(Self { columns, mean, n, t })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn snapshot_count(&self) -> usize {
        self.t
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Mean-subtracted snapshot `y_t`.
    pub fn column(&self, t: usize) -> &[T] {
        &self.columns[t * self.n..(t + 1) * self.n]
    }

    /// `sum_t ||y_t||^2`, equal to the sum of all eigenvalues of `S S^T`.
    pub fn total_energy(&self) -> T {
        self.columns.iter().map(|&v| v * v).sum()
    }
}

/// Number of retained modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeSelection {
    Fixed(usize),
    /// Smallest M whose retained-energy fraction reaches `fraction`, capped at `max_modes`.
    Energy { fraction: f64, max_modes: usize },
}

impl Default for ModeSelection {
    fn default() -> Self {
        ModeSelection::Energy {
            fraction: DEFAULT_ENERGY,
            max_modes: DEFAULT_MAX_MODES,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis<T> {
    mean: Vec<T>,
    /// Descending eigenvalues of `S S^T` for the retained modes.
    eigenvalues: Vec<T>,
    /// Orthonormal modes, mode-major (`M x N`).
    modes: Vec<T>,
    n: usize,
    snapshots: usize,
    total_energy: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport<T> {
    pub residual: T,
    pub retained_energy: T,
}

/// Fits a basis with exactly `m` modes from the training snapshots.
pub fn fit_pod<T: Real>(snapshots: &[Vec<T>], m: usize) -> Result<PodBasis<T>> {
    PodBasis::fit(&SnapshotMatrix::from_snapshots(snapshots)?, ModeSelection::Fixed(m))
}

impl<T: Real> PodBasis<T> {
    pub fn fit(matrix: &SnapshotMatrix<T>, selection: ModeSelection) -> Result<Self> {
        let (n, t) = (matrix.n, matrix.t);
        let max_rank = n.min(t);
        if let ModeSelection::Fixed(m) = selection {
            if m > max_rank {
                return Err(Error::Config(format!("{m} modes requested but min(N, T) = {max_rank}")));
            }
        }
        let s = DMatrix::<f64>::from_iterator(n, t, matrix.columns.iter().map(|v| v.as_f64()));
        let svd = s.svd(true, false);
        let u = svd.u.as_ref().expect("U requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let all_eigs: Vec<f64> = order.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
        let total: f64 = matrix.total_energy().as_f64();

        let m = match selection {
            ModeSelection::Fixed(m) => m,
            ModeSelection::Energy { fraction, max_modes } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::Config(format!("energy fraction {fraction} outside [0, 1]")));
                }
                let mut acc = 0.0;
                let mut m = all_eigs.len();
                for (k, &e) in all_eigs.iter().enumerate() {
                    acc += e;
                    if total <= 0.0 || acc / total >= fraction - 1e-12 {
                        m = k + 1;
                        break;
                    }
                }
                m.min(max_modes).min(max_rank)
            }
        };

        let mut modes = Vec::with_capacity(m * n);
        for &k in order.iter().take(m) {
            let col = u.column(k);
            let pivot = col
                .iter()
                .copied()
                .find(|v| v.abs() > 1e-12)
                .unwrap_or(1.0);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            modes.extend(col.iter().map(|&v| T::lit(sign * v)));
        }
        Ok(Self {
            mean: matrix.mean.clone(),
            eigenvalues: all_eigs[..m].iter().map(|&e| T::lit(e)).collect(),
            modes,
            n,
            snapshots: t,
            total_energy: T::lit(total),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn mode(&self, j: usize) -> &[T] {
        &self.modes[j * self.n..(j + 1) * self.n]
    }

    /// Fraction of `sum_t ||y_t||^2` captured by the retained modes.
    pub fn retained_energy(&self) -> T {
        if self.total_energy > T::zero() {
            self.eigenvalues.iter().copied().sum::<T>() / self.total_energy
        } else {
            T::one()
        }
    }

    /// Coefficients `a_j = <E - mean, v_j>`.
    pub fn project(&self, snapshot: &[T]) -> Result<Vec<T>> {
        if snapshot.len() != self.n {
            return Err(Error::dims(self.n, snapshot.len(), "snapshot length"));
        }
        let centered: Vec<T> = snapshot.iter().zip(&self.mean).map(|(&v, &m)| v - m).collect();
        Ok(self.project_centered(&centered))
    }

    fn project_centered(&self, y: &[T]) -> Vec<T> {
        (0..self.mode_count()).map(|j| dot(self.mode(j), y)).collect()
    }

    /// `mean + sum_j a_j v_j`.
    pub fn reconstruct(&self, coeffs: &[T]) -> Result<Vec<T>> {
        if coeffs.len() != self.mode_count() {
            return Err(Error::dims(self.mode_count(), coeffs.len(), "coefficient length"));
        }
        let mut out = self.mean.clone();
        for (j, &a) in coeffs.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(self.mode(j)) {
                *o += a * v;
            }
        }
        Ok(out)
    }

    /// `R = sum_t ||y_t - sum_j a_j(t) v_j||^2` over the given snapshots.
    pub fn residual(&self, snapshots: &[Vec<T>]) -> Result<ResidualReport<T>> {
        let mut residual = T::zero();
        for s in snapshots {
            let rec = self.reconstruct(&self.project(s)?)?;
            residual += s.iter().zip(&rec).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
        }
        Ok(ResidualReport {
            residual,
            retained_energy: self.retained_energy(),
        })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        for v in [self.n, self.snapshots, self.mode_count()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        out.write_all(&self.retained_energy().as_f64().to_le_bytes())?;
        for v in self.mean.iter().chain(&self.eigenvalues).chain(&self.modes) {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|_| Error::MissingData(path.to_path_buf()))?;
        let mut input = BufReader::new(file);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format(path, "bad magic"));
        }
        let mut word = [0u8; 8];
        let mut next = |input: &mut BufReader<File>| -> Result<[u8; 8]> {
            input
                .read_exact(&mut word)
                .map_err(|_| Error::format(path, "truncated"))?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut input)?) as usize;
        let snapshots = u64::from_le_bytes(next(&mut input)?) as usize;
        let m = u64::from_le_bytes(next(&mut input)?) as usize;
        let fraction = f64::from_le_bytes(next(&mut input)?);
        let mut read = |count: usize, input: &mut BufReader<File>| -> Result<Vec<T>> {
            (0..count)
                .map(|_| Ok(T::lit(f64::from_le_bytes(next(input)?))))
                .collect()
        };
        let mean = read(n, &mut input)?;
        let eigenvalues = read(m, &mut input)?;
        let modes = read(m * n, &mut input)?;
        let retained: f64 = eigenvalues.iter().map(|e| e.as_f64()).sum();
        let total = if fraction > 0.0 { retained / fraction } else { 0.0 };
        Ok(Self {
            mean,
            eigenvalues,
            modes,
            n,
            snapshots,
            total_energy: T::lit(total),
        })
    }
}
