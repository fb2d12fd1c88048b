//! Situation assessment for a micro real-time-strategy game.
//!
//! The crate bundles a small tensor library with reverse-mode
//! differentiation ([`tensor`], [`autograd`]), a deterministic grid RTS
//! simulator that produces labelled match datasets ([`sim`]), a
//! space-time-feature attention transformer and its space-time-only
//! ablation ([`model`]), the classical weighted-sum evaluators
//! ([`baselines`]), and training plus progress-stratified evaluation
//! ([`train`], [`metrics`], [`evaluation`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the element type to `f64`, which is what the training and
//! verification pipelines use.

pub mod autograd;
pub mod baselines;
pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod model;
pub mod num;
pub mod optim;
pub mod rng;
pub mod sim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use num::Scalar;
pub use rng::SplitMix64;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tape64 = autograd::Tape<f64>;
pub type Model64 = model::Model<f64>;
