use log::{debug, info};
use rayon::prelude::*;

use super::{EpochHistory, EpochMetrics, EpochRecord, LossKind, OptimizerState, TrainConfig, TrainError};
use crate::dataio::SequenceSample;
use crate::evaluation::{binary_output_accuracy, compute_metrics, ConfusionMatrix, MetricsReport};
use crate::numerics::{derive_seed, splitmix64, Scalar, SeededRng};
use crate::recurrent::{model_backward_into, model_forward, predict_class, predict_scores, Gradients, Model};

use super::optimizer_step;

/// Samples per parallel work unit. Partial gradients are summed in chunk
/// order, so results do not depend on the number of threads.
const CHUNK: usize = 16;

/// Result of running a model over a labeled set in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Mean per-sample loss.
    pub loss: f64,
    pub report: MetricsReport,
    pub predictions: Vec<usize>,
    /// Per-class probabilities for each sample.
    pub scores: Vec<Vec<f64>>,
}

impl Evaluation {
    pub fn epoch_metrics(&self) -> EpochMetrics {
        EpochMetrics {
            loss: self.loss,
            accuracy: self.report.accuracy,
            precision_macro: self.report.precision_macro,
            recall_macro: self.report.recall_macro,
            f1_macro: self.report.f1_macro,
        }
    }
}

fn check_loss_head<T: Scalar>(m: &Model<T>, loss: LossKind) -> Result<(), TrainError> {
    let head = m.config().output_activation;
    if head != loss.output_activation() {
        return Err(TrainError::Config(format!(
            "{} loss needs a {} output layer, model has {}",
            loss,
            loss.output_activation().name(),
            head.name()
        )));
    }
    Ok(())
}

struct ChunkOut<T> {
    grads: Gradients<T>,
    loss: f64,
    /// `(label, prediction)`
    outcomes: Vec<(usize, usize)>,
}

fn sample_rng(base: u64, epoch: usize, index: usize) -> SeededRng {
    SeededRng::new(splitmix64(base ^ ((epoch as u64) << 40) ^ index as u64))
}

#[allow(clippy::too_many_arguments)]
fn run_chunk<T: Scalar>(
    m: &Model<T>,
    samples: &[SequenceSample<T>],
    indices: &[usize],
    cfg: &TrainConfig,
    dropout_base: u64,
    epoch: usize,
) -> Result<ChunkOut<T>, TrainError> {
    let mut grads = m.zero_gradients();
    let mut loss = 0.0;
    let mut outcomes = Vec::with_capacity(indices.len());
    for &i in indices {
        let s = &samples[i];
        let mut rng = sample_rng(dropout_base, epoch, i);
        let (scores, trace) = model_forward(m, s, true, &mut rng)?;
        let (l, upstream) = cfg.loss.evaluate(&scores, s.target);
        loss += l.as_f64();
        outcomes.push((s.target, predict_class(&scores)));
        model_backward_into(m, &trace, &upstream, cfg.truncation, &mut grads)?;
    }
    Ok(ChunkOut { grads, loss, outcomes })
}

fn metrics_from(outcomes: &[(usize, usize)], classes: usize, loss: f64) -> Result<EpochMetrics, TrainError> {
    let mut c = ConfusionMatrix::new(classes);
    for &(label, pred) in outcomes {
        c.record(label, pred)?;
    }
    let r = compute_metrics(&c)?;
    Ok(EpochMetrics {
        loss,
        accuracy: r.accuracy,
        precision_macro: r.precision_macro,
        recall_macro: r.recall_macro,
        f1_macro: r.f1_macro,
    })
}

/// Mini-batch training.
///
/// Each epoch shuffles the training set with a seeded permutation, splits it
/// into batches (the last one may be short), and applies one optimizer step
/// per batch using the mean sample gradient. The dropout rate of `m` is set
/// to `cfg.dropout`. Output is a pure function of `(m, data, cfg)`.
pub fn train<T: Scalar>(
    mut m: Model<T>,
    train_set: &[SequenceSample<T>],
    val_set: &[SequenceSample<T>],
    cfg: &TrainConfig,
) -> Result<(Model<T>, EpochHistory), TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    check_loss_head(&m, cfg.loss)?;
    m.set_dropout(cfg.dropout)?;

    let mut shuffle_rng = SeededRng::derive(cfg.seed, "train.shuffle");
    let dropout_base = derive_seed(cfg.seed, "train.dropout");
    let mut opt = OptimizerState::new(cfg.optimizer, &m);
    let mut history = EpochHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut outcomes = Vec::with_capacity(order.len());

        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let parts = batch
                .par_chunks(CHUNK)
                .map(|idx| run_chunk(&m, train_set, idx, cfg, dropout_base, epoch))
                .collect::<Result<Vec<_>, _>>()?;
            let mut parts = parts.into_iter();
            let first = parts.next().expect("batches are non-empty");
            let mut grads = first.grads;
            let mut batch_loss = first.loss;
            outcomes.extend(first.outcomes);
            for p in parts {
                grads.accumulate(&p.grads);
                batch_loss += p.loss;
                outcomes.extend(p.outcomes);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b + 1 });
            }
            grads.scale(T::one() / T::lit(batch.len() as f64));
            optimizer_step(&mut opt, &mut m, &grads, cfg.learning_rate)?;
            epoch_loss += batch_loss;
            debug!("epoch {epoch} batch {} loss {:.6}", b + 1, batch_loss / batch.len() as f64);
        }

        let train_metrics = metrics_from(&outcomes, m.num_classes(), epoch_loss / train_set.len() as f64)?;
        let val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&m, val_set, cfg.loss)?.epoch_metrics())
        };
        info!(
            "epoch {epoch}/{}: loss {:.5} acc {:.4}{}",
            cfg.epochs,
            train_metrics.loss,
            train_metrics.accuracy,
            val.map(|v| format!(" | val loss {:.5} acc {:.4}", v.loss, v.accuracy))
                .unwrap_or_default()
        );
        history.records.push(EpochRecord {
            epoch,
            train: train_metrics,
            val,
        });
    }
    Ok((m, history))
}

/// Inference-mode loss, predictions and metrics over `samples`.
pub fn evaluate<T: Scalar>(
    m: &Model<T>,
    samples: &[SequenceSample<T>],
    loss: LossKind,
) -> Result<Evaluation, TrainError> {
    check_loss_head(m, loss)?;
    let outputs = samples
        .par_iter()
        .map(|s| predict_scores(m, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    let mut c = ConfusionMatrix::new(m.num_classes());
    let mut predictions = Vec::with_capacity(samples.len());
    let mut scores = Vec::with_capacity(samples.len());
    for (s, out) in samples.iter().zip(&outputs) {
        total += loss.evaluate(out, s.target).0.as_f64();
        let p = predict_class(out);
        c.record(s.target, p)?;
        predictions.push(p);
        scores.push(loss.probabilities(out).iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    }
    let mut report = compute_metrics(&c)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.target).collect();
    report.binary_output_accuracy = Some(binary_output_accuracy(&scores, &labels)?);
    Ok(Evaluation {
        loss: total / samples.len() as f64,
        report,
        predictions,
        scores,
    })
}
