//! Gated recurrent cells, the dense head, and whole-model forward and
//! backward passes.

mod dense;
mod gru;
mod lstm;
mod model;
mod network;

use thiserror::Error;

use crate::numerics::NumericsError;

pub use dense::{dense_backward, dense_forward, DenseParams};
pub use gru::{gru_step, gru_step_backward, GruParams, GruStepTrace};
pub use lstm::{lstm_step, lstm_step_backward, LstmParams, LstmStepTrace};
pub use model::{Architecture, Gradients, Layer, Model, ModelConfig};
pub use network::{
    model_backward, model_backward_into, model_backward_truncated, model_forward, predict_class, predict_scores,
    ForwardTrace, LayerTrace,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrentError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{what} has dimension {found}, expected {expected}")]
    Input {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("layer {layer} expects input width {found} but receives {expected}")]
    LayerChain {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("layer {layer}: {source}")]
    InLayer {
        layer: usize,
        #[source]
        source: Box<RecurrentError>,
    },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("forward trace does not belong to the current model state")]
    StaleTrace,
}

impl RecurrentError {
    pub(crate) fn in_layer(self, layer: usize) -> Self {
        RecurrentError::InLayer {
            layer,
            source: Box::new(self),
        }
    }
}
