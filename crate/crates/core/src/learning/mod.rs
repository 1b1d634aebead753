//! Local learning: synthetic data, differentiable models and the
//! mini-batch SGD-with-momentum trainer each node runs every round.

mod data;
mod model;

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

pub use data::{gen_synthetic, split_even, DataSpec, Dataset, SyntheticData};
pub use model::{evaluate_accuracy, loss_and_grad, Architecture, Model};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 1,
            batch_size: 32,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "learning_rate",
                reason: format!("must be non-negative, got {}", self.learning_rate),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig {
                field: "momentum",
                reason: format!("must lie in [0, 1), got {}", self.momentum),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig {
                field: "epochs",
                reason: "must be positive".into(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig {
                field: "batch_size",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Runs `cfg.epochs` shuffled passes of mini-batch SGD with classical
/// momentum (`v ← m v − η g`, `θ ← θ + v`), starting from zero velocity.
pub fn local_train<R: Rng + ?Sized>(model: &Model, data: &Dataset, cfg: &TrainerConfig, rng: &mut R) -> Result<Model> {
    cfg.validate()?;
    let mut out = model.clone();
    if data.is_empty() {
        return Ok(out);
    }
    let mut velocity = alloc::vec![0.0; model.params().dim()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = out.loss_and_grad(data, batch)?;
            for ((theta, v), g) in out.params_mut().iter_mut().zip(&mut velocity).zip(grad.iter()) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *theta += *v;
            }
        }
    }
    if !out.params().is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(out)
}
