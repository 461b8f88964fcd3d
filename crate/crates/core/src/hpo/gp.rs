use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Exact GP regression with a squared-exponential kernel on standardized targets.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    length_scale: f64,
}

fn kernel(a: &[f64], b: &[f64], ell: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * ell * ell)).exp()
}

impl GaussianProcess {
    pub fn fit(points: Vec<Vec<f64>>, y: &[f64], length_scale: f64, jitter: f64) -> Result<Self> {
        let n = points.len();
        if n == 0 || n != y.len() {
            return Err(Error::dims(n.max(1), y.len(), "gp targets"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite gp target".into()));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if n < 2 || var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        let gram = DMatrix::from_fn(n, n, |i, j| kernel(&points[i], &points[j], length_scale));
        let mut nugget = jitter;
        let chol = loop {
            let mut k = gram.clone();
            for i in 0..n {
                k[(i, i)] += nugget;
            }
            if let Some(c) = k.cholesky() {
                break c;
            }
            nugget *= 10.0;
            if nugget > 1.0 {
                return Err(Error::Domain("gp kernel matrix not positive definite".into()));
            }
        };
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
        let alpha = chol.solve(&ys);
        Ok(Self {
            points,
            chol,
            alpha,
            y_mean,
            y_scale,
            length_scale,
        })
    }

    /// Posterior mean and standard deviation in the original target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| kernel(p, x, self.length_scale)),
        );
        let mean = k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("nonsingular factor");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}
