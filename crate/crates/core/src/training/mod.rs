//! Losses, optimiser, sampling, label refinement and the two-step training pipeline.

mod adam;
pub(crate) mod losses;
pub(crate) mod pipeline;
mod sampling;

use std::fmt;

use crate::error::{Error, Result};

pub use adam::{AdamState, ADAM_EPS, BETA1, BETA2};
pub use losses::{cross_entropy, focal_loss, focal_loss_grad, weighted_cross_entropy, LOG_FLOOR};
pub use pipeline::{
    cs_batch_gradient, train_step1, train_step2, training_windows, Step1Output, Step2Output, TileTarget,
};
pub use sampling::{class_quota, refine_score_map, sample_training_pixels, LossWeights, RefinedLabels, TrainPixel};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_step1: f64,
    pub lr_step2: f64,
    pub batch_step1: usize,
    pub batch_step2: usize,
    pub epochs_step1: usize,
    pub epochs_step2: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub w_train: f64,
    pub w_error: f64,
    pub w_else: f64,
    pub per_class_count: usize,
    pub max_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_step1: 0.005,
            lr_step2: 0.001,
            batch_step1: 100,
            batch_step2: 5,
            epochs_step1: 60,
            epochs_step2: 30,
            alpha: 0.25,
            gamma: 2.0,
            w_train: 50.0,
            w_error: 100.0,
            w_else: 0.5,
            per_class_count: 300,
            max_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{} must be in (0, 1], got {}", name, v)))
            }
        };
        rate("lr_step1", self.lr_step1)?;
        rate("lr_step2", self.lr_step2)?;
        rate("max_rate", self.max_rate)?;
        for (name, v) in [("w_train", self.w_train), ("w_error", self.w_error), ("w_else", self.w_else)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{} must be positive, got {}", name, v)));
            }
        }
        if !(self.alpha > 0.0 && self.gamma >= 0.0) {
            return Err(Error::InvalidArgument("focal alpha must be positive and gamma non-negative".into()));
        }
        if self.batch_step1 == 0 || self.batch_step2 == 0 || self.per_class_count == 0 {
            return Err(Error::InvalidArgument("batch sizes and the per-class count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            w_train: self.w_train,
            w_error: self.w_error,
            w_else: self.w_else,
        }
    }
}

/// One optimiser step; formats as `epoch=<n> step=<k> loss=<f> lr=<f>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

impl fmt::Display for StepLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} step={} loss={:.6} lr={}", self.epoch, self.step, self.loss, self.lr)
    }
}
