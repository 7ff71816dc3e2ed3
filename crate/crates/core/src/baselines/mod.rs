//! Classical learners used as baselines: impurity-based decision trees,
//! random forests, first- and second-order gradient boosting, and RBF-SVM
//! inference.
//!
//! Learners work on `f64` feature matrices; every split threshold is the
//! midpoint between two consecutive distinct feature values and a row goes
//! left when `x[feature] <= threshold`.

mod boost;
mod forest;
mod gain;
mod impurity;
mod persist;
mod svm;
mod tree;

use thiserror::Error;

pub use boost::{fit_gradient_boost, fit_xgb, Booster, BoosterKind, GradientBoostParams, XgbParams};
pub use forest::{fit_forest, Forest, ForestParams};
pub use gain::{xgb_leaf_weight, xgb_split_gain};
pub use impurity::{impurity, weighted_impurity, Criterion};
pub use persist::{baseline_from_str, baseline_to_string, load_baseline, save_baseline, BaselineModel, SavedBaseline};
pub use svm::{rbf_kernel, svm_decision, svm_decision_value, SvmParams};
pub use tree::{best_split, fit_tree, predict_tree, LeafValue, Split, Tree, TreeNode, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("no training rows")]
    Empty,
    #[error("class counts are all zero")]
    ZeroCounts,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

fn check_xy(x: &crate::numerics::Matrix<f64>, y: &[usize], classes: usize) -> Result<(), BaselineError> {
    if x.rows() == 0 {
        return Err(BaselineError::Empty);
    }
    if x.rows() != y.len() {
        return Err(BaselineError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= classes) {
        return Err(BaselineError::Label { label, classes });
    }
    Ok(())
}

/// Number of classes implied by the labels, at least the standard eight.
fn class_count(y: &[usize]) -> usize {
    y.iter().max().map_or(0, |m| m + 1).max(crate::dataio::NUM_CLASSES)
}
