//! Complex-valued convolutional networks for dense PolSAR image classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`ctensor`] split-plane complex tensors and shape primitives,
//! * [`cops`] differentiable complex operations with analytic backward passes,
//! * [`nets`] the patch classifier, its dilated dense counterpart and the
//!   parallel fusion network, plus tiled inference,
//! * [`training`] losses, Adam, sampling, label refinement and the two-step
//!   training pipeline,
//! * [`polsar`] covariance scenes, feature vectors, normalisation and
//!   synthetic Wishart scenes,
//! * [`metrics`] confusion matrix, OA, Kappa and FWIoU,
//! * [`gradcheck`] finite-difference verification of every backward pass.

pub mod cops;
pub mod ctensor;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod nets;
pub mod polsar;
pub mod training;

#[cfg(test)]
mod testutil;

pub use ctensor::{concat_channels, crop_center, mirror_pad, polar, CTensor, PolarView, ScoreMap};
pub use error::{Error, Result};
