use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::numerics::{Scalar, Vector};

/// How rows become recurrent-model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "window")]
pub enum SequenceMode {
    /// One sample per row; the seven features are fed as seven scalar steps.
    Point,
    /// `w` consecutive rows as steps; the target is the label of the row after the window.
    Window(usize),
}

impl SequenceMode {
    /// Dimension of each step vector.
    pub fn step_dim(self) -> usize {
        match self {
            SequenceMode::Point => 1,
            SequenceMode::Window(_) => super::NUM_FEATURES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SequenceMode::Point => "point",
            SequenceMode::Window(_) => "window",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample<T> {
    pub steps: Vec<Vector<T>>,
    pub target: usize,
}

impl<T: Scalar> SequenceSample<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step_dim(&self) -> usize {
        self.steps.first().map_or(0, Vector::len)
    }

    pub fn cast<U: Scalar>(&self) -> SequenceSample<U> {
        SequenceSample {
            steps: self.steps.iter().map(|v| v.iter().map(|&x| U::lit(x.as_f64())).collect::<Vec<_>>().into()).collect(),
            target: self.target,
        }
    }
}

pub fn make_sequences<T: Scalar>(
    d: &Dataset<T>,
    mode: SequenceMode,
) -> Result<Vec<SequenceSample<T>>, DataError> {
    let f = d.features();
    match mode {
        SequenceMode::Point => Ok((0..d.len())
            .map(|i| SequenceSample {
                steps: f.row(i).iter().map(|&v| Vector::from(vec![v])).collect(),
                target: d.labels()[i],
            })
            .collect()),
        SequenceMode::Window(w) => {
            let n = d.len();
            if w == 0 || w >= n {
                return Err(DataError::Window { window: w, rows: n });
            }
            Ok((0..n - w)
                .map(|i| SequenceSample {
                    steps: (i..i + w).map(|r| Vector::from(f.row(r).to_vec())).collect(),
                    target: d.labels()[i + w],
                })
                .collect())
        }
    }
}
