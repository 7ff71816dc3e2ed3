//! Confusion matrices and classification metrics, the batch-size/dropout
//! sweep harness, and emission of per-epoch curves.

mod confusion;
mod history;
mod metrics;
mod report;
mod sweep;

use thiserror::Error;

pub use confusion::{confusion, ConfusionMatrix};
pub use history::{
    emit_history, emit_sweep, read_history, read_sweep, HistoryFormat, SweepRow, HISTORY_COLUMNS, SWEEP_COLUMNS,
};
pub use metrics::{binary_output_accuracy, compute_metrics, ClassMetrics, MetricsReport};
pub use report::{format_report, write_report};
pub use sweep::{run_sweep, SweepEntry, SweepParameter, SweepResult, DEFAULT_BATCH_SIZES, DEFAULT_DROPOUTS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },
}
