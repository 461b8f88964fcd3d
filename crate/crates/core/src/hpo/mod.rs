//! Bayesian optimization over training hyperparameters.

mod bo;
mod gp;

pub use bo::{ucb, BayesOpt, BoConfig, LiarStrategy};
pub use gp::GaussianProcess;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::train::{BATCH_MAX, BATCH_MIN, LR_MAX, LR_MIN};
use crate::nn::OptimizerKind;

/// Length of an encoded configuration: lr, batch, one-hot optimizer.
pub const ENCODED_DIM: usize = 2 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
}

/// Log-uniform learning rate and batch size, categorical optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub lr_min: f64,
    pub lr_max: f64,
    pub batch_min: usize,
    pub batch_max: usize,
}

impl Default for HyperSpace {
    fn default() -> Self {
        Self {
            lr_min: LR_MIN,
            lr_max: LR_MAX,
            batch_min: BATCH_MIN,
            batch_max: BATCH_MAX,
        }
    }
}

fn unit(v: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        0.0
    } else {
        (v.ln() - lo.ln()) / (hi.ln() - lo.ln())
    }
}

fn from_unit(u: f64, lo: f64, hi: f64) -> f64 {
    (lo.ln() + u.clamp(0.0, 1.0) * (hi.ln() - lo.ln())).exp()
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return Err(Error::Config(format!(
                "learning-rate range [{}, {}] is empty or nonpositive",
                self.lr_min, self.lr_max
            )));
        }
        if self.batch_min == 0 || self.batch_min > self.batch_max || self.batch_max < BATCH_MIN {
            return Err(Error::Config(format!(
                "batch range [{}, {}] invalid",
                self.batch_min, self.batch_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, cfg: &HyperConfig) -> bool {
        let tol = 1e-12 * self.lr_max;
        cfg.learning_rate >= self.lr_min - tol
            && cfg.learning_rate <= self.lr_max + tol
            && (self.batch_min..=self.batch_max).contains(&cfg.batch_size)
    }

    pub fn encode(&self, cfg: &HyperConfig) -> Result<[f64; ENCODED_DIM]> {
        if !self.contains(cfg) {
            return Err(Error::Domain(format!("{cfg:?} outside the hyperparameter space")));
        }
        let mut x = [0.0; ENCODED_DIM];
        x[0] = unit(cfg.learning_rate, self.lr_min, self.lr_max).clamp(0.0, 1.0);
        x[1] = unit(cfg.batch_size as f64, self.batch_min as f64, self.batch_max as f64);
        x[2 + cfg.optimizer.index()] = 1.0;
        Ok(x)
    }

    /// Inverse of `encode`; batch size is rounded, the optimizer is the argmax of the one-hot block.
    pub fn decode(&self, x: &[f64; ENCODED_DIM]) -> HyperConfig {
        let batch = from_unit(x[1], self.batch_min as f64, self.batch_max as f64).round() as usize;
        let opt = (0..4).fold(0, |best, k| if x[2 + k] > x[2 + best] { k } else { best });
        HyperConfig {
            learning_rate: from_unit(x[0], self.lr_min, self.lr_max),
            batch_size: batch.clamp(self.batch_min, self.batch_max),
            optimizer: OptimizerKind::ALL[opt],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperConfig {
        let lr = from_unit(rng.random::<f64>(), self.lr_min, self.lr_max);
        let batch = from_unit(rng.random::<f64>(), self.batch_min as f64, self.batch_max as f64).round() as usize;
        HyperConfig {
            learning_rate: lr,
            batch_size: batch.clamp(self.batch_min, self.batch_max),
            optimizer: OptimizerKind::ALL[rng.random_range(0..4)],
        }
    }
}
