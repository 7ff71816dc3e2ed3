use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::{EvalError, MetricsReport};
use crate::dataio::SequenceSample;
use crate::numerics::Scalar;
use crate::recurrent::{Model, ModelConfig};
use crate::training::{evaluate, train, EpochHistory, TrainConfig, TrainError};

/// Batch sizes explored in the reference experiments (296 is kept as listed).
pub const DEFAULT_BATCH_SIZES: [f64; 8] = [8.0, 16.0, 32.0, 64.0, 128.0, 296.0, 512.0, 1024.0];
pub const DEFAULT_DROPOUTS: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    #[serde(rename = "batch")]
    BatchSize,
    Dropout,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::BatchSize => "batch",
            SweepParameter::Dropout => "dropout",
        }
    }

    pub fn default_values(self) -> &'static [f64] {
        match self {
            SweepParameter::BatchSize => &DEFAULT_BATCH_SIZES,
            SweepParameter::Dropout => &DEFAULT_DROPOUTS,
        }
    }

    /// `base` with this parameter set to `value`, or why `value` is invalid.
    pub fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig, String> {
        let mut c = base.clone();
        match self {
            SweepParameter::BatchSize => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64) {
                    return Err(format!("batch size {value} is not a positive integer"));
                }
                c.batch_size = value as usize;
            }
            SweepParameter::Dropout => {
                if !(0.0..1.0).contains(&value) {
                    return Err(format!("dropout {value} outside [0, 1)"));
                }
                c.dropout = value;
            }
        }
        Ok(c)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "batch" | "batch_size" => Ok(SweepParameter::BatchSize),
            "dropout" => Ok(SweepParameter::Dropout),
            other => Err(format!("unknown sweep parameter `{other}` (expected batch or dropout)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    /// Validation metrics of the final model.
    pub report: MetricsReport,
    /// Training loss of the last epoch.
    pub final_loss: f64,
    pub final_val_loss: f64,
    pub history: EpochHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    /// In input order.
    pub entries: Vec<SweepEntry>,
}

/// Trains one fresh model per value, all from the same seed and data.
///
/// Every value is validated before any training starts.
pub fn run_sweep<T: Scalar>(
    parameter: SweepParameter,
    values: &[f64],
    base: &TrainConfig,
    model_config: &ModelConfig,
    model_seed: u64,
    train_set: &[SequenceSample<T>],
    val_set: &[SequenceSample<T>],
) -> Result<SweepResult, TrainError> {
    if values.is_empty() {
        return Err(EvalError::Sweep("no values to sweep".into()).into());
    }
    if val_set.is_empty() {
        return Err(EvalError::Sweep("validation set is empty".into()).into());
    }
    let configs = values
        .iter()
        .map(|&v| parameter.apply(base, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(EvalError::Sweep)?;
    for c in &configs {
        c.validate()?;
    }

    let mut entries = Vec::with_capacity(values.len());
    for (&value, cfg) in values.iter().zip(&configs) {
        info!("sweep {parameter}={value}");
        let model = Model::new(model_config.clone(), model_seed)?;
        let (model, history) = train(model, train_set, val_set, cfg)?;
        let eval = evaluate(&model, val_set, cfg.loss)?;
        entries.push(SweepEntry {
            value,
            final_loss: history.last().map_or(f64::NAN, |r| r.train.loss),
            final_val_loss: eval.loss,
            report: eval.report,
            history,
        });
    }
    Ok(SweepResult { parameter, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{SeededRng, Vector};
    use crate::recurrent::Architecture;

    fn data(n: usize, seed: u64) -> Vec<SequenceSample<f64>> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|_| {
                let target = rng.below(2);
                SequenceSample {
                    steps: (0..2)
                        .map(|_| Vector::from(vec![rng.uniform(0.0, 0.5) + 0.5 * target as f64]))
                        .collect(),
                    target,
                }
            })
            .collect()
    }

    fn setup() -> (TrainConfig, ModelConfig) {
        (
            TrainConfig {
                epochs: 2,
                batch_size: 4,
                learning_rate: 0.01,
                seed: 1,
                ..TrainConfig::default()
            },
            ModelConfig::canonical(Architecture::Gru, 1).with_width(3),
        )
    }

    #[test]
    fn default_lists() {
        assert_eq!(DEFAULT_BATCH_SIZES.len(), 8);
        assert_eq!(*DEFAULT_BATCH_SIZES.last().unwrap(), 1024.0);
        assert_eq!(DEFAULT_BATCH_SIZES[5], 296.0);
        assert_eq!(DEFAULT_DROPOUTS.first(), Some(&0.2));
        assert_eq!(DEFAULT_DROPOUTS.last(), Some(&0.9));
    }

    #[test]
    fn single_value_sweep_equals_plain_run() {
        let (base, mc) = setup();
        let (t, v) = (data(20, 1), data(8, 2));
        let r = run_sweep(SweepParameter::BatchSize, &[5.0], &base, &mc, 3, &t, &v).unwrap();
        let cfg = TrainConfig { batch_size: 5, ..base };
        let (m, h) = train(Model::new(mc, 3).unwrap(), &t, &v, &cfg).unwrap();
        assert_eq!(r.entries[0].history, h);
        assert_eq!(r.entries[0].report, evaluate(&m, &v, cfg.loss).unwrap().report);
    }

    #[test]
    fn deterministic_and_ordered() {
        let (base, mc) = setup();
        let (t, v) = (data(20, 1), data(8, 2));
        let vals = [0.7, 0.2, 0.5];
        let a = run_sweep(SweepParameter::Dropout, &vals, &base, &mc, 3, &t, &v).unwrap();
        let b = run_sweep(SweepParameter::Dropout, &vals, &base, &mc, 3, &t, &v).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.iter().map(|e| e.value).collect::<Vec<_>>(), vals);
    }

    #[test]
    fn invalid_values_rejected_up_front() {
        let (base, mc) = setup();
        let (t, v) = (data(4, 1), data(4, 2));
        for (p, vals) in [
            (SweepParameter::Dropout, vec![0.5, 1.0]),
            (SweepParameter::Dropout, vec![-0.5]),
            (SweepParameter::BatchSize, vec![8.0, 0.0]),
            (SweepParameter::BatchSize, vec![2.5]),
            (SweepParameter::BatchSize, vec![]),
        ] {
            let err = run_sweep(p, &vals, &base, &mc, 3, &t, &v).unwrap_err();
            assert!(matches!(err, TrainError::Eval(EvalError::Sweep(_))), "{err}");
        }
    }
}
