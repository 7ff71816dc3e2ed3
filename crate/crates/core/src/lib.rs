//! Hybrid GRU/LSTM classifier for labeled 3D point clouds, with classical
//! tree-ensemble baselines, evaluation metrics and sweep tooling.
//!
//! The numeric core is generic over [`numerics::Scalar`] (`f32` or `f64`);
//! the aliases below fix it to `f64`, which is what the command-line tool
//! and all reference tests use.

pub mod baselines;
pub mod cli;
pub mod dataio;
pub mod evaluation;
pub mod numerics;
pub mod recurrent;
pub mod training;

pub type Matrix = numerics::Matrix<f64>;
pub type Vector = numerics::Vector<f64>;
pub type Dataset = dataio::Dataset<f64>;
pub type PointRecord = dataio::PointRecord<f64>;
pub type NormalizationStats = dataio::NormalizationStats<f64>;
pub type SequenceSample = dataio::SequenceSample<f64>;
pub type Model = recurrent::Model<f64>;
pub type Gradients = recurrent::Gradients<f64>;
pub type ForwardTrace = recurrent::ForwardTrace<f64>;
pub type GruParams = recurrent::GruParams<f64>;
pub type LstmParams = recurrent::LstmParams<f64>;
pub type DenseParams = recurrent::DenseParams<f64>;
