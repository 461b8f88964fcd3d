// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod ensemble;
pub mod error;
pub mod hpo;
pub mod nn;
pub mod pipeline;
pub mod pod;
pub mod real;
pub mod report;
pub mod search;
pub mod sst;

pub use error::{Error, Result};
pub use real::Real;

pub type Network64 = nn::Network<f64>;
pub type Network32 = nn::Network<f32>;
pub type Samples64 = nn::Samples<f64>;
pub type Samples32 = nn::Samples<f32>;
pub type GaussianPrediction64 = nn::GaussianPrediction<f64>;
pub type GaussianPrediction32 = nn::GaussianPrediction<f32>;
pub type PodBasis64 = pod::PodBasis<f64>;
pub type PodBasis32 = pod::PodBasis<f32>;
pub type Ensemble64 = ensemble::Ensemble<f64>;
pub type Ensemble32 = ensemble::Ensemble<f32>;
