use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class is this one.
    pub support: u64,
}

/// Standard classification metrics derived from a confusion matrix.
///
/// `*_macro` averages are unweighted means over classes present in the
/// labels; `*_weighted` weight each present class by its support.
/// `binary_output_accuracy` is the fraction of the eight sigmoid outputs
/// that agree with the one-hot target after thresholding at 0.5; it is
/// only available when scores were kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub recall_micro: f64,
    pub per_class: Vec<ClassMetrics>,
    pub binary_output_accuracy: Option<f64>,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let k = c.classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = c.get(i, i);
            let precision = ratio(tp, c.col_sum(i));
            let recall = ratio(tp, c.row_sum(i));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: c.row_sum(i),
            }
        })
        .collect();

    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let n_present = present.len() as f64;
    let macro_of = |f: fn(&ClassMetrics) -> f64| present.iter().map(|m| f(m)).sum::<f64>() / n_present;
    let weighted_of = |f: fn(&ClassMetrics) -> f64| {
        present.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };

    let micro_tp: u64 = (0..k).map(|i| c.get(i, i)).sum();
    let micro_fn: u64 = (0..k).map(|i| c.row_sum(i) - c.get(i, i)).sum();

    Ok(MetricsReport {
        accuracy: ratio(c.trace(), total),
        precision_macro: macro_of(|m| m.precision),
        recall_macro: macro_of(|m| m.recall),
        f1_macro: macro_of(|m| m.f1),
        precision_weighted: weighted_of(|m| m.precision),
        recall_weighted: weighted_of(|m| m.recall),
        f1_weighted: weighted_of(|m| m.f1),
        recall_micro: ratio(micro_tp, micro_tp + micro_fn),
        per_class,
        binary_output_accuracy: None,
        total,
    })
}

/// Fraction of per-output binary decisions (score >= 0.5 vs one-hot target) that are right.
pub fn binary_output_accuracy(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: scores.len(),
            labels: labels.len(),
        });
    }
    let mut right = 0u64;
    let mut total = 0u64;
    for (s, &l) in scores.iter().zip(labels) {
        for (j, &v) in s.iter().enumerate() {
            right += u64::from((v >= 0.5) == (j == l));
            total += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(right as f64 / total as f64)
}
