//! Point-cloud ingestion and preprocessing.
//!
//! Rows follow the schema `x,y,z,intensity,r,g,b,class`. Features are scaled
//! per column into `[0, 1]` with training-split min/max statistics and then
//! arranged as sequences for the recurrent models.

mod csvio;
mod normalize;
mod sequence;
mod split;
mod subsample;
pub mod synthetic;

use thiserror::Error;

use crate::numerics::{Matrix, NumericsError, Scalar, Vector};

pub use csvio::{load_csv, read_csv, write_csv, write_csv_to};
pub use normalize::{apply_minmax, fit_minmax, NormalizationStats};
pub use sequence::{make_sequences, SequenceMode, SequenceSample};
pub use split::split_train_test;
pub use subsample::{subsample_csv, SubsampleSummary};

/// Feature columns in file order.
pub const FEATURE_NAMES: [&str; 7] = ["x", "y", "z", "intensity", "r", "g", "b"];
pub const LABEL_COLUMN: &str = "class";
pub const NUM_FEATURES: usize = 7;
pub const NUM_CLASSES: usize = 8;

/// Default names for class indices 0-7.
pub const DEFAULT_CLASS_NAMES: [&str; NUM_CLASSES] = [
    "man-made terrain",
    "natural terrain",
    "high vegetation",
    "low vegetation",
    "buildings",
    "hard scape",
    "scanning artefacts",
    "cars",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("schema error: unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("schema error: column `{name}` at position {found}, expected position {expected}")]
    ColumnOrder {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("parse error on line {line}: column `{column}` value `{value}` is not a number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("validation error on line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("dataset is empty")]
    Empty,
    #[error("window length {window} must satisfy 1 <= w < N = {rows}")]
    Window { window: usize, rows: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("label {label} outside 0..{classes}")]
    Label { label: usize, classes: usize },
    #[error("requested {requested} rows but source has {available}")]
    SubsampleSize { requested: usize, available: usize },
    #[error("expected {expected} feature columns, found {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One labeled point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
    pub r: T,
    pub g: T,
    pub b: T,
    pub label: usize,
}

impl<T: Scalar> PointRecord<T> {
    pub fn features(&self) -> [T; NUM_FEATURES] {
        [self.x, self.y, self.z, self.intensity, self.r, self.g, self.b]
    }

    pub fn from_features(f: &[T], label: usize) -> Self {
        Self {
            x: f[0],
            y: f[1],
            z: f[2],
            intensity: f[3],
            r: f[4],
            g: f[5],
            b: f[6],
            label,
        }
    }
}

/// Labeled feature matrix: one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Matrix<T>, labels: Vec<usize>) -> Result<Self, DataError> {
        if features.rows() != labels.len() {
            return Err(DataError::Numerics(NumericsError::Length {
                op: "dataset",
                left: features.rows(),
                right: labels.len(),
            }));
        }
        if features.rows() > 0 && features.cols() != NUM_FEATURES {
            return Err(DataError::FeatureCount {
                expected: NUM_FEATURES,
                found: features.cols(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(DataError::Label {
                label,
                classes: NUM_CLASSES,
            });
        }
        Ok(Self {
            features,
            labels,
            class_names: DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn empty() -> Self {
        Self {
            features: Matrix::zeros(0, NUM_FEATURES),
            labels: Vec::new(),
            class_names: DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn from_records(records: &[PointRecord<T>]) -> Result<Self, DataError> {
        let mut data = Vec::with_capacity(records.len() * NUM_FEATURES);
        for r in records {
            data.extend_from_slice(&r.features());
        }
        let features = Matrix::from_vec(records.len(), NUM_FEATURES, data)?;
        Self::new(features, records.iter().map(|r| r.label).collect())
    }

    /// Replaces the label names (must be one per class slot).
    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), NUM_CLASSES, "one name per class slot");
        self.class_names = names;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn record(&self, i: usize) -> PointRecord<T> {
        PointRecord::from_features(self.features.row(i), self.labels[i])
    }

    pub fn records(&self) -> impl Iterator<Item = PointRecord<T>> + '_ {
        (0..self.len()).map(move |i| self.record(i))
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Frequency of the most common class (0 for an empty dataset).
    pub fn majority_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        *self.class_counts().iter().max().unwrap() as f64 / self.len() as f64
    }
}

/// One-hot encoding of `label` over `k` classes.
pub fn one_hot<T: Scalar>(label: usize, k: usize) -> Result<Vector<T>, DataError> {
    if label >= k {
        return Err(DataError::Label { label, classes: k });
    }
    let mut v = Vector::zeros(k);
    v[label] = T::one();
    Ok(v)
}
