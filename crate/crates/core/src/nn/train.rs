use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{accumulate_gradient, evaluate_nll};
use super::network::{Network, Samples};
use super::optim::{OptimizerKind, OptimizerState};
use crate::error::{Error, Result};
use crate::real::Real;

pub const LR_MIN: f64 = 1e-4;
pub const LR_MAX: f64 = 1e-1;
pub const BATCH_MIN: usize = 32;
pub const BATCH_MAX: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Epochs without validation improvement before the learning rate is reduced.
    pub lr_patience: usize,
    pub lr_factor: f64,
    /// Epochs without validation improvement before training stops.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            lr_patience: 15,
            lr_factor: 0.5,
            early_stop_patience: 20,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(LR_MIN..=LR_MAX).contains(&self.learning_rate) {
            return Err(Error::Config(format!(
                "learning rate {} outside [{LR_MIN}, {LR_MAX}]",
                self.learning_rate
            )));
        }
        if !(BATCH_MIN..=BATCH_MAX).contains(&self.batch_size) {
            return Err(Error::Config(format!(
                "batch size {} outside [{BATCH_MIN}, {BATCH_MAX}]",
                self.batch_size
            )));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::Config("lr_factor must lie in (0, 1)".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `None` for epoch 0, which only evaluates the initial weights.
    pub train_nll: Option<f64>,
    pub valid_nll: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Weights from the epoch with the lowest validation NLL.
    pub network: Network<T>,
    pub best_valid_nll: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub diverged: bool,
}

/// Mini-batch NLL minimization with plateau LR reduction, early stopping and
/// best-validation checkpointing.
pub fn train<T: Real>(
    net: Network<T>,
    train_set: &Samples<T>,
    valid_set: &Samples<T>,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Config("training and validation splits must be nonempty".into()));
    }
    let mut net = net;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::<T>::new(cfg.optimizer, net.param_count());
    let mut grad = vec![T::zero(); net.param_count()];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batch = cfg.batch_size.min(train_set.len());
    let mut lr = cfg.learning_rate;

    let initial = evaluate_nll(&net, valid_set).map(Real::as_f64);
    let mut best_nll = match initial {
        Ok(v) if v.is_finite() => v,
        _ => {
            return Ok(TrainOutcome {
                best_valid_nll: f64::NAN,
                best_epoch: 0,
                history: Vec::new(),
                diverged: true,
                network: net,
            })
        }
    };
    let mut best_weights = net.weights().to_vec();
    let mut best_epoch = 0;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_nll: None,
        valid_nll: best_nll,
        learning_rate: lr,
    }];
    let mut since_best = 0usize;
    let mut since_reduce = 0usize;
    let mut diverged = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        let mut failed = false;
        for chunk in order.chunks(batch) {
            match accumulate_gradient(&net, train_set, chunk, &mut grad) {
                Ok(loss) if loss.is_finite() => {
                    weighted += loss.as_f64() * chunk.len() as f64;
                    state.step(net.weights_mut(), &grad, T::lit(lr))?;
                }
                Ok(_) | Err(Error::NumericOverflow { .. }) | Err(Error::NonFiniteGradient { .. }) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let valid = if failed {
            None
        } else {
            match evaluate_nll(&net, valid_set) {
                Ok(v) if v.is_finite() && net.weights().iter().all(|w| w.is_finite()) => Some(v.as_f64()),
                Ok(_) | Err(Error::NumericOverflow { .. }) => None,
                Err(e) => return Err(e),
            }
        };
        let Some(valid) = valid else {
            diverged = true;
            log::debug!("training diverged at epoch {epoch}");
            break;
        };
        history.push(EpochRecord {
            epoch,
            train_nll: Some(weighted / train_set.len() as f64),
            valid_nll: valid,
            learning_rate: lr,
        });
        if valid < best_nll {
            best_nll = valid;
            best_epoch = epoch;
            best_weights.copy_from_slice(net.weights());
            since_best = 0;
            since_reduce = 0;
        } else {
            since_best += 1;
            since_reduce += 1;
            if since_reduce >= cfg.lr_patience {
                lr *= cfg.lr_factor;
                since_reduce = 0;
            }
            if since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }

    net.weights_mut().copy_from_slice(&best_weights);
    Ok(TrainOutcome {
        network: net,
        best_valid_nll: best_nll,
        best_epoch,
        history,
        diverged,
    })
}
