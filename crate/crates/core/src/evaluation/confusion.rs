use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataio::NUM_CLASSES;

/// `counts[i][j]` = samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), EvalError> {
        let k = self.classes();
        if truth >= k || predicted >= k {
            return Err(EvalError::ClassOutOfRange {
                class: truth.max(predicted),
                classes: k,
            });
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Number of samples whose true class is `c`.
    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Number of samples predicted as `c`.
    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Tabulates predictions against labels over the eight classes.
pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    let mut m = ConfusionMatrix::new(NUM_CLASSES);
    for (&p, &l) in preds.iter().zip(labels) {
        m.record(l, p)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = [0, 1, 2, 3, 4, 5, 6, 7, 3, 3];
        let m = confusion(&labels, &labels).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(m.get(i, j), 0);
                }
            }
        }
        assert_eq!(m.get(3, 3), 3);
    }

    #[test]
    fn empty_is_all_zero() {
        let m = confusion(&[], &[]).unwrap();
        assert_eq!(m.total(), 0);
    }

    #[test]
    fn errors() {
        assert!(confusion(&[0, 1], &[0]).is_err());
        assert!(confusion(&[8], &[0]).is_err());
    }

    #[test]
    fn matches_tally_oracle() {
        let mut rng = SeededRng::new(21);
        let preds: Vec<usize> = (0..1000).map(|_| rng.below(8)).collect();
        let labels: Vec<usize> = (0..1000).map(|_| rng.below(8)).collect();
        let m = confusion(&preds, &labels).unwrap();
        let mut tally = [[0u64; 8]; 8];
        for k in 0..1000 {
            tally[labels[k]][preds[k]] += 1;
        }
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(m.get(i, j), tally[i][j]);
            }
            assert_eq!(m.row_sum(i), labels.iter().filter(|&&l| l == i).count() as u64);
            assert_eq!(m.col_sum(i), preds.iter().filter(|&&p| p == i).count() as u64);
        }
    }
}
