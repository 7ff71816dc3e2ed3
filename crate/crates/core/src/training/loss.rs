use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{Activation, Scalar, Vector};

/// Probabilities are clipped to `[CLIP, 1 - CLIP]` before taking logs.
pub const CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Summed binary cross-entropy over independent sigmoid outputs.
    #[default]
    Bce,
    /// Softmax over raw scores followed by categorical cross-entropy.
    Softmax,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Softmax => "softmax",
        }
    }

    /// Output-layer activation the loss expects.
    pub fn output_activation(self) -> Activation {
        match self {
            LossKind::Bce => Activation::Sigmoid,
            LossKind::Softmax => Activation::Linear,
        }
    }

    /// `(loss, dLoss/dScores)` for one sample with class `target`.
    pub fn evaluate<T: Scalar>(self, scores: &Vector<T>, target: usize) -> (T, Vector<T>) {
        match self {
            LossKind::Bce => {
                let mut y = Vector::zeros(scores.len());
                y[target] = T::one();
                bce_loss(scores, &y)
            }
            LossKind::Softmax => softmax_cross_entropy(scores, target),
        }
    }

    /// Per-class probabilities from raw model output.
    pub fn probabilities<T: Scalar>(self, scores: &Vector<T>) -> Vector<T> {
        match self {
            LossKind::Bce => scores.clone(),
            LossKind::Softmax => softmax(scores),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "softmax" => Ok(LossKind::Softmax),
            other => Err(format!("unknown loss `{other}` (expected bce or softmax)")),
        }
    }
}

/// Summed binary cross-entropy of `scores` against `target`.
///
/// Scores are clipped to `[1e-12, 1 - 1e-12]`; inside the clipped region
/// the returned gradient is zero, matching the clipped function exactly.
pub fn bce_loss<T: Scalar>(scores: &Vector<T>, target: &Vector<T>) -> (T, Vector<T>) {
    assert_eq!(scores.len(), target.len(), "score/target length mismatch");
    let lo = T::lit(CLIP);
    let hi = T::one() - lo;
    let mut loss = T::zero();
    let mut grad = Vector::zeros(scores.len());
    for (j, (&s, &y)) in scores.iter().zip(target.iter()).enumerate() {
        // keep NaN visible: f64::max would silently replace it
        let p = if s.is_nan() { s } else { s.max(lo).min(hi) };
        loss -= y * p.ln() + (T::one() - y) * (T::one() - p).ln();
        if s > lo && s < hi {
            grad[j] = (p - y) / (p * (T::one() - p));
        }
    }
    (loss, grad)
}

pub fn softmax<T: Scalar>(scores: &Vector<T>) -> Vector<T> {
    let max = scores.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let exps = scores.map(|s| (s - max).exp());
    let total = exps.sum();
    exps.map(|e| e / total)
}

/// Categorical cross-entropy of softmax(`scores`) against class `target`.
pub fn softmax_cross_entropy<T: Scalar>(scores: &Vector<T>, target: usize) -> (T, Vector<T>) {
    let p = softmax(scores);
    let loss = -p[target].max(T::lit(CLIP)).ln();
    let mut grad = p;
    grad[target] -= T::one();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn perfect_prediction_costs_almost_nothing() {
        let y = Vector::from(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (l, g) = bce_loss(&y, &y);
        assert!(l < 1e-10, "{l}");
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_scores_cost_eight_ln2() {
        let s = Vector::filled(8, 0.5);
        let y = Vector::from(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (l, _) = bce_loss(&s, &y);
        assert!((l - 8.0 * 2f64.ln()).abs() < 1e-12);
        assert!((l - 5.5452).abs() < 1e-4);
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = SeededRng::new(5);
        for _ in 0..50 {
            let s: Vec<f64> = (0..8).map(|_| rng.uniform(0.001, 0.999)).collect();
            let t = rng.below(8);
            let (l, g) = LossKind::Bce.evaluate(&Vector::from(s.clone()), t);
            let mut expect = 0.0;
            for j in 0..8 {
                expect += if j == t { -s[j].ln() } else { -(1.0 - s[j]).ln() };
                let dg = if j == t { -1.0 / s[j] } else { 1.0 / (1.0 - s[j]) };
                assert!((g[j] - dg).abs() <= 1e-12 * dg.abs().max(1.0));
            }
            assert!((l - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_gradient_matches_finite_difference() {
        let s: Vector<f64> = Vector::from(vec![0.3, 0.9, 0.05, 0.5, 0.7, 0.2, 0.6, 0.4]);
        let (_, g) = LossKind::Bce.evaluate(&s, 2);
        for j in 0..8 {
            let mut a = s.clone();
            let mut b = s.clone();
            a[j] += 1e-7;
            b[j] -= 1e-7;
            let fd = (LossKind::Bce.evaluate(&a, 2).0 - LossKind::Bce.evaluate(&b, 2).0) / 2e-7;
            assert!((fd - g[j]).abs() < 1e-5 * g[j].abs().max(1.0));
        }
    }

    #[test]
    fn clipped_region_has_zero_gradient() {
        let s: Vector<f64> = Vector::from(vec![0.0, 1.0]);
        let y = Vector::from(vec![1.0, 0.0]);
        let (l, g) = bce_loss(&s, &y);
        assert!(l.is_finite());
        assert!((l - 2.0 * -(1e-12f64).ln()).abs() < 1e-3);
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn softmax_gradient_is_p_minus_y() {
        let s: Vector<f64> = Vector::from(vec![1.0, -2.0, 0.5]);
        let (l, g) = softmax_cross_entropy(&s, 0);
        let z: f64 = s.iter().map(|v| v.exp()).sum();
        assert!((l - (z.ln() - 1.0)).abs() < 1e-12);
        assert!((g[0] - (1f64.exp() / z - 1.0)).abs() < 1e-12);
        assert!((g.sum()).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_shift_invariant_and_stable() {
        let p = softmax(&Vector::from(vec![1000.0f64, 1000.0]));
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }
}
