//! Loss functions, optimizers, the epoch loop, finite-difference gradient
//! checking and model files.

mod gradcheck;
mod loss;
mod optimizer;
mod persist;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::SequenceMode;
use crate::evaluation::EvalError;
use crate::recurrent::RecurrentError;

pub use gradcheck::{gradient_check, gradient_check_in, gradient_check_with, GradCheckReport};
pub use loss::{bce_loss, softmax, softmax_cross_entropy, LossKind, CLIP};
pub use optimizer::{optimizer_step, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use persist::{
    load_model, load_saved, model_from_str, model_to_string, save_model, save_saved, PersistError, SavedModel,
    FORMAT_VERSION,
};
pub use trainer::{evaluate, train, Evaluation};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient in `{0}`")]
    NonFiniteGradient(String),
    #[error("gradient tensors do not match the model's parameters")]
    GradientShape,
    #[error(transparent)]
    Model(#[from] RecurrentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub seed: u64,
    pub mode: SequenceMode,
    /// Backpropagate through at most this many trailing steps; `None` is full BPTT.
    pub truncation: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 3000,
            learning_rate: 0.001,
            dropout: 0.5,
            optimizer: OptimizerKind::Adam,
            loss: LossKind::Bce,
            seed: 0,
            mode: SequenceMode::Point,
            truncation: None,
        }
    }
}

impl TrainConfig {
    /// A learning rate of exactly zero is accepted (it freezes the model),
    /// negative or non-finite rates are not.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate {} must be a finite non-negative number", self.learning_rate));
        }
        if self.truncation == Some(0) {
            return bad("truncation length must be at least 1".into());
        }
        if let SequenceMode::Window(0) = self.mode {
            return bad("window length must be at least 1".into());
        }
        Ok(())
    }
}

/// Loss and macro metrics of one pass over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train: EpochMetrics,
    pub val: Option<EpochMetrics>,
}

/// One record per completed epoch.
///
/// Training metrics are accumulated over the epoch's own (dropout-active)
/// forward passes; validation metrics come from an inference pass after the
/// epoch's last update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochHistory {
    pub records: Vec<EpochRecord>,
}

impl EpochHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.learning_rate, c.dropout), (10, 3000, 0.001, 0.5));
        assert_eq!(c.optimizer, OptimizerKind::Adam);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_invalid_values() {
        let base = TrainConfig::default();
        for c in [
            TrainConfig { epochs: 0, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { dropout: 1.0, ..base.clone() },
            TrainConfig { dropout: -0.1, ..base.clone() },
            TrainConfig { learning_rate: -1.0, ..base.clone() },
            TrainConfig { learning_rate: f64::NAN, ..base.clone() },
            TrainConfig { truncation: Some(0), ..base.clone() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
