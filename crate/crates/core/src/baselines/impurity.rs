use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BaselineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
    Misclassification,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Gini, Criterion::Entropy, Criterion::Misclassification];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
            Criterion::Misclassification => "misclassification",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            "misclassification" | "error" => Ok(Criterion::Misclassification),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

/// Node impurity from per-class counts.
///
/// gini = 1 − Σp², entropy = −Σ p log₂ p (with 0·log 0 = 0),
/// misclassification = 1 − max p.
pub fn impurity(counts: &[usize], criterion: Criterion) -> Result<f64, BaselineError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(BaselineError::ZeroCounts);
    }
    Ok(impurity_unchecked(counts, total, criterion))
}

#[inline]
pub(crate) fn impurity_unchecked(counts: &[usize], total: usize, criterion: Criterion) -> f64 {
    let n = total as f64;
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>(),
        Criterion::Misclassification => 1.0 - *counts.iter().max().unwrap_or(&0) as f64 / n,
    }
}

/// Count-weighted mean impurity of two children.
pub fn weighted_impurity(left: &[usize], right: &[usize], criterion: Criterion) -> Result<f64, BaselineError> {
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    if nl == 0 || nr == 0 {
        return Err(BaselineError::ZeroCounts);
    }
    Ok(weighted_unchecked(left, nl, right, nr, criterion))
}

#[inline]
pub(crate) fn weighted_unchecked(left: &[usize], nl: usize, right: &[usize], nr: usize, criterion: Criterion) -> f64 {
    (nl as f64 * impurity_unchecked(left, nl, criterion) + nr as f64 * impurity_unchecked(right, nr, criterion))
        / (nl + nr) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_nodes_are_zero() {
        for c in Criterion::ALL {
            assert_eq!(impurity(&[5, 0, 0], c).unwrap(), 0.0);
        }
    }

    #[test]
    fn binary_even_split_maxima() {
        assert_eq!(impurity(&[3, 3], Criterion::Gini).unwrap(), 0.5);
        assert_eq!(impurity(&[3, 3], Criterion::Entropy).unwrap(), 1.0);
        assert_eq!(impurity(&[3, 3], Criterion::Misclassification).unwrap(), 0.5);
    }

    #[test]
    fn worked_gini() {
        assert_eq!(impurity(&[2, 1, 1], Criterion::Gini).unwrap(), 0.625);
    }

    #[test]
    fn all_zero_is_an_error() {
        assert_eq!(impurity(&[0, 0], Criterion::Gini), Err(BaselineError::ZeroCounts));
        assert!(impurity(&[], Criterion::Entropy).is_err());
    }

    proptest! {
        #[test]
        fn zero_iff_pure(counts in proptest::collection::vec(0usize..20, 1..8)) {
            prop_assume!(counts.iter().sum::<usize>() > 0);
            let pure = counts.iter().filter(|&&c| c > 0).count() == 1;
            for c in Criterion::ALL {
                let v = impurity(&counts, c).unwrap();
                prop_assert!(v >= -1e-15);
                prop_assert_eq!(v.abs() < 1e-15, pure, "{:?} {:?} {}", c, counts, v);
            }
        }
    }
}
