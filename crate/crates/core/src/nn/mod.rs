//! Trainable networks with a Gaussian (mean, variance) output head.

pub mod checkpoint;
pub mod loss;
mod network;
pub mod optim;
mod spec;
pub mod train;

pub use loss::{evaluate_nll, gradient, nll_loss, NLL_CONST};
pub use network::{GaussianPrediction, Network, Samples, VARIANCE_FLOOR};
pub use optim::{OptimizerKind, OptimizerState};
pub use spec::{Activation, LayerKind, LayerSpec, NetworkSpec, SkipEdge};
pub use train::{train, EpochRecord, TrainOutcome, TrainingConfig};

use crate::error::Result;
use crate::real::Real;

/// Validates `spec` and initializes weights deterministically from `seed`.
pub fn build_network<T: Real>(spec: NetworkSpec, seed: u64) -> Result<Network<T>> {
    Network::build(spec, seed)
}
