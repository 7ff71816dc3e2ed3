use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gain::{fit_gain_tree, GainParams};
use super::tree::TreeNode;
use super::{check_xy, class_count, BaselineError};
use crate::numerics::{derive_seed, Matrix, SeededRng};

const PRIOR_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoosterKind {
    /// Squared-error regression trees on the residuals.
    Gradient,
    /// Newton trees on gradient and hessian sums.
    Xgb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBoostParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for GradientBoostParams {
    fn default() -> Self {
        GradientBoostParams {
            rounds: 3000,
            learning_rate: 0.05,
            max_depth: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XgbParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub seed: u64,
}

impl Default for XgbParams {
    fn default() -> Self {
        XgbParams {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 5,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 0.9,
            colsample: 0.9,
            seed: 0,
        }
    }
}

/// One-vs-rest additive model: class c scores
/// `prior[c] + learning_rate · Σ_k trees[c][k](x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub kind: BoosterKind,
    pub num_classes: usize,
    pub num_features: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub priors: Vec<f64>,
    pub trees: Vec<Vec<TreeNode>>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a raw score, computed without overflow.
#[inline]
fn logloss(z: f64, y: bool) -> f64 {
    // −[y log σ(z) + (1−y) log(1−σ(z))] = softplus(z) − y·z
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if y { z } else { 0.0 }
}

impl Booster {
    /// Raw per-class scores using only the first `rounds` trees.
    pub fn scores_at(&self, row: &[f64], rounds: usize) -> Vec<f64> {
        self.priors
            .iter()
            .zip(&self.trees)
            .map(|(p, trees)| p + trees.iter().take(rounds).map(|t| self.learning_rate * t.weight(row)).sum::<f64>())
            .collect()
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        self.scores_at(row, usize::MAX)
    }

    /// Argmax of the class scores, ties to the lowest class.
    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.scores(row))
    }

    pub fn predict_all(&self, x: &Matrix<f64>) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Mean training cross-entropy of each class's ensemble after 0..=rounds
    /// trees: `result[c][k]`.
    pub fn loss_by_round(&self, x: &Matrix<f64>, y: &[usize]) -> Vec<Vec<f64>> {
        let n = x.rows() as f64;
        (0..self.num_classes)
            .map(|c| {
                let mut f = vec![self.priors[c]; x.rows()];
                let loss = |f: &[f64]| f.iter().zip(y).map(|(&z, &l)| logloss(z, l == c)).sum::<f64>() / n;
                let mut out = vec![loss(&f)];
                for t in &self.trees[c] {
                    for (i, row) in x.iter_rows().enumerate() {
                        f[i] += self.learning_rate * t.weight(row);
                    }
                    out.push(loss(&f));
                }
                out
            })
            .collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

struct Plan {
    kind: BoosterKind,
    rounds: usize,
    learning_rate: f64,
    tree: GainParams,
    subsample: f64,
    colsample: f64,
    seed: u64,
}

fn fit(x: &Matrix<f64>, y: &[usize], plan: Plan) -> Result<Booster, BaselineError> {
    let classes = class_count(y);
    check_xy(x, y, classes)?;
    if !(plan.learning_rate.is_finite() && plan.learning_rate > 0.0) {
        return Err(BaselineError::Param("learning rate must be positive".into()));
    }
    let (n, d) = x.shape();
    let priors: Vec<f64> = (0..classes)
        .map(|c| {
            let p = y.iter().filter(|&&l| l == c).count() as f64 / n as f64;
            let p = p.clamp(PRIOR_CLIP, 1.0 - PRIOR_CLIP);
            (p / (1.0 - p)).ln()
        })
        .collect();
    let trees = (0..classes)
        .into_par_iter()
        .map(|c| {
            let positives = y.iter().filter(|&&l| l == c).count();
            if positives == 0 || positives == n {
                // the prior already separates a class that is always or never present
                return Vec::new();
            }
            let mut rng = SeededRng::new(derive_seed(plan.seed, &format!("boost.class.{c}")));
            let target: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l == c))).collect();
            let mut f = vec![priors[c]; n];
            let mut g = vec![0.0; n];
            let mut h = vec![1.0; n];
            let mut out = Vec::with_capacity(plan.rounds);
            for _ in 0..plan.rounds {
                for i in 0..n {
                    let p = sigmoid(f[i]);
                    g[i] = p - target[i];
                    if plan.kind == BoosterKind::Xgb {
                        h[i] = p * (1.0 - p);
                    }
                }
                let rows = sample(&mut rng, n, plan.subsample);
                let mut features = sample(&mut rng, d, plan.colsample);
                features.sort_unstable();
                let tree = fit_gain_tree(x, &g, &h, &rows, &features, plan.tree);
                for (i, row) in x.iter_rows().enumerate() {
                    f[i] += plan.learning_rate * tree.weight(row);
                }
                out.push(tree);
            }
            out
        })
        .collect();
    Ok(Booster {
        kind: plan.kind,
        num_classes: classes,
        num_features: d,
        rounds: plan.rounds,
        learning_rate: plan.learning_rate,
        lambda: plan.tree.lambda,
        gamma: plan.tree.gamma,
        priors,
        trees,
    })
}

/// Sorted draw without replacement of round(fraction·n) indices, at least one.
fn sample(rng: &mut SeededRng, n: usize, fraction: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if fraction >= 1.0 {
        return idx;
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    for i in 0..k {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

pub fn fit_gradient_boost(x: &Matrix<f64>, y: &[usize], params: GradientBoostParams) -> Result<Booster, BaselineError> {
    fit(
        x,
        y,
        Plan {
            kind: BoosterKind::Gradient,
            rounds: params.rounds,
            learning_rate: params.learning_rate,
            tree: GainParams {
                max_depth: params.max_depth,
                lambda: 0.0,
                gamma: 0.0,
            },
            subsample: 1.0,
            colsample: 1.0,
            seed: 0,
        },
    )
}

pub fn fit_xgb(x: &Matrix<f64>, y: &[usize], params: XgbParams) -> Result<Booster, BaselineError> {
    let unit = |v: f64| v > 0.0 && v <= 1.0;
    if !(params.lambda >= 0.0 && params.gamma >= 0.0) {
        return Err(BaselineError::Param("lambda and gamma must be nonnegative".into()));
    }
    if !unit(params.subsample) || !unit(params.colsample) {
        return Err(BaselineError::Param("subsample and colsample must lie in (0, 1]".into()));
    }
    fit(
        x,
        y,
        Plan {
            kind: BoosterKind::Xgb,
            rounds: params.rounds,
            learning_rate: params.learning_rate,
            tree: GainParams {
                max_depth: params.max_depth,
                lambda: params.lambda,
                gamma: params.gamma,
            },
            subsample: params.subsample,
            colsample: params.colsample,
            seed: params.seed,
        },
    )
}
