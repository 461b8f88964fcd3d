use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_RHO: f64 = 0.9;
pub const RMSPROP_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adagrad,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Sgd,
        OptimizerKind::Rmsprop,
        OptimizerKind::Adagrad,
        OptimizerKind::Adam,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }
}

/// Per-parameter optimizer memory.
#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerState<T> {
    Sgd,
    Rmsprop { mean_sq: Vec<T> },
    Adagrad { sum_sq: Vec<T> },
    Adam { m: Vec<T>, v: Vec<T>, t: u64 },
}

impl<T: Real> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Rmsprop => OptimizerState::Rmsprop {
                mean_sq: vec![T::zero(); params],
            },
            OptimizerKind::Adagrad => OptimizerState::Adagrad {
                sum_sq: vec![T::zero(); params],
            },
            OptimizerKind::Adam => OptimizerState::Adam {
                m: vec![T::zero(); params],
                v: vec![T::zero(); params],
                t: 0,
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerState::Sgd => OptimizerKind::Sgd,
            OptimizerState::Rmsprop { .. } => OptimizerKind::Rmsprop,
            OptimizerState::Adagrad { .. } => OptimizerKind::Adagrad,
            OptimizerState::Adam { .. } => OptimizerKind::Adam,
        }
    }

    /// Applies one update to `weights` in place.
    pub fn step(&mut self, weights: &mut [T], grad: &[T], lr: T) -> Result<()> {
        if !(lr > T::zero()) {
            return Err(Error::Domain(format!("learning rate {lr} must be positive")));
        }
        if weights.len() != grad.len() {
            return Err(Error::dims(weights.len(), grad.len(), "gradient length"));
        }
        match self {
            OptimizerState::Sgd => {
                for (w, &g) in weights.iter_mut().zip(grad) {
                    *w -= lr * g;
                }
            }
            OptimizerState::Rmsprop { mean_sq } => {
                check_len(mean_sq, weights)?;
                let rho = T::lit(RMSPROP_RHO);
                for ((w, &g), s) in weights.iter_mut().zip(grad).zip(mean_sq.iter_mut()) {
                    *s = rho * *s + (T::one() - rho) * g * g;
                    *w -= lr * g / (s.sqrt() + T::lit(RMSPROP_EPS));
                }
            }
            OptimizerState::Adagrad { sum_sq } => {
                check_len(sum_sq, weights)?;
                for ((w, &g), s) in weights.iter_mut().zip(grad).zip(sum_sq.iter_mut()) {
                    *s += g * g;
                    *w -= lr * g / (s.sqrt() + T::lit(ADAGRAD_EPS));
                }
            }
            OptimizerState::Adam { m, v, t } => {
                check_len(m, weights)?;
                *t += 1;
                let b1 = T::lit(ADAM_BETA1);
                let b2 = T::lit(ADAM_BETA2);
                let c1 = T::one() - b1.powi(*t as i32);
                let c2 = T::one() - b2.powi(*t as i32);
                for (((w, &g), mi), vi) in weights.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = b1 * *mi + (T::one() - b1) * g;
                    *vi = b2 * *vi + (T::one() - b2) * g * g;
                    let m_hat = *mi / c1;
                    let v_hat = *vi / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + T::lit(ADAM_EPS));
                }
            }
        }
        Ok(())
    }
}

fn check_len<T>(state: &[T], weights: &[T]) -> Result<()> {
    if state.len() == weights.len() {
        Ok(())
    } else {
        Err(Error::dims(state.len(), weights.len(), "optimizer state size"))
    }
}
