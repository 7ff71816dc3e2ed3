use super::tree::{midpoint, LeafValue, Sorted, TreeNode};
use crate::numerics::Matrix;

#[inline]
fn ratio(g: f64, h: f64) -> f64 {
    // a zero denominator only arises with zero curvature and λ = 0; such a
    // side contributes nothing
    if h == 0.0 {
        0.0
    } else {
        g * g / h
    }
}

/// Loss reduction of a split from child gradient/hessian sums, penalized by
/// γ for the extra leaf.
pub fn xgb_split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (ratio(gl, hl + lambda) + ratio(gr, hr + lambda) - ratio(gl + gr, hl + hr + lambda)) - gamma
}

/// Minimizer of the second-order expansion: w = −G/(H+λ).
pub fn xgb_leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d == 0.0 {
        0.0
    } else {
        -g / d
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GainParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
}

/// Greedy regression tree on per-row gradients `g` and hessians `h`.
///
/// With h ≡ 1, λ = γ = 0 the gain is half the squared-error reduction and the
/// leaf weights are mean residuals, which is the first-order booster's tree.
pub(crate) struct GainGrower<'a> {
    pub x: &'a Matrix<f64>,
    pub g: &'a [f64],
    pub h: &'a [f64],
    pub params: GainParams,
    pub features: &'a [usize],
    pub mark: Vec<bool>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl GainGrower<'_> {
    pub fn grow(&mut self, sorted: Sorted, depth: usize) -> TreeNode {
        let (gs, hs) = sorted
            .rows()
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.g[i], h + self.h[i]));
        let w = xgb_leaf_weight(gs, hs, self.params.lambda);
        let leaf = |n: usize| TreeNode::Leaf {
            counts: vec![n],
            value: LeafValue::Weight(w),
        };
        let n = sorted.len();
        if depth >= self.params.max_depth || n < 2 {
            return leaf(n);
        }
        let Some(best) = self.scan(&sorted) else {
            return leaf(n);
        };
        let (l, r) = sorted.partition(self.x, best.feature, best.threshold, &mut self.mark);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        // prune a split whose own gain is not positive once its subtree
        // has collapsed to two leaves
        let children_are_leaves = matches!(left, TreeNode::Leaf { .. }) && matches!(right, TreeNode::Leaf { .. });
        if children_are_leaves && best.gain <= 0.0 {
            return leaf(n);
        }
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn scan(&self, sorted: &Sorted) -> Option<Best> {
        let n = sorted.len();
        let (gs, hs) = sorted
            .rows()
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.g[i], h + self.h[i]));
        let p = self.params;
        let mut best: Option<Best> = None;
        for &f in self.features {
            let list = &sorted.0[f];
            let (mut gl, mut hl) = (0.0, 0.0);
            for pos in 0..n - 1 {
                let i = list[pos];
                gl += self.g[i];
                hl += self.h[i];
                let a = self.x[(i, f)];
                let b = self.x[(list[pos + 1], f)];
                if a == b {
                    continue;
                }
                let gain = xgb_split_gain(gl, hl, gs - gl, hs - hl, p.lambda, p.gamma);
                if best.as_ref().map_or(true, |s| gain > s.gain) {
                    best = Some(Best {
                        feature: f,
                        threshold: midpoint(a, b),
                        gain,
                    });
                }
            }
        }
        best
    }
}

pub(crate) fn fit_gain_tree(
    x: &Matrix<f64>,
    g: &[f64],
    h: &[f64],
    rows: &[usize],
    features: &[usize],
    params: GainParams,
) -> TreeNode {
    let mut grower = GainGrower {
        x,
        g,
        h,
        params,
        features,
        mark: vec![false; x.rows()],
    };
    grower.grow(Sorted::new(x, rows), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn worked_gain() {
        let g = xgb_split_gain(2.0, 1.0, -3.0, 2.0, 1.0, 0.0);
        assert!((g - 2.375).abs() < 1e-12, "{g}");
    }

    #[test]
    fn zero_and_symmetric_cases() {
        assert_eq!(xgb_split_gain(0.0, 3.0, 0.0, 1.0, 1.0, 0.7), -0.7);
        assert_eq!(xgb_split_gain(0.0, 0.0, 0.0, 0.0, 0.0, 0.0), 0.0);
        // identical halves carry no structure to exploit (exactly so when λ = 0)
        let gain = xgb_split_gain(1.5, 2.0, 1.5, 2.0, 0.0, 0.25);
        assert!((gain + 0.25).abs() < 1e-15);
        assert!(xgb_split_gain(1.5, 2.0, 1.5, 2.0, 0.5, 0.25) < -0.25);
    }

    #[test]
    fn leaf_weight() {
        assert_eq!(xgb_leaf_weight(3.0, 2.0, 1.0), -1.0);
        assert_eq!(xgb_leaf_weight(3.0, 0.0, 0.0), 0.0);
        assert!(xgb_leaf_weight(5.0, 1.0, 1e300).abs() < 1e-299);
    }

    /// Best stump by direct residual sum of squares on each side.
    fn variance_stump(x: &Matrix<f64>, r: &[f64]) -> (usize, f64) {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
        };
        let mut best = (0, 0.0, f64::INFINITY);
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = x.column(f).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, rr): (Vec<_>, Vec<_>) = (0..x.rows()).partition(|&i| x[(i, f)] <= t);
                let l: Vec<f64> = l.iter().map(|&i| r[i]).collect();
                let rr: Vec<f64> = rr.iter().map(|&i| r[i]).collect();
                let s = sse(&l) + sse(&rr);
                if s < best.2 {
                    best = (f, t, s);
                }
            }
        }
        (best.0, best.1)
    }

    #[test]
    fn stump_matches_variance_reduction() {
        let mut rng = SeededRng::new(8);
        for _ in 0..25 {
            let n = 5 + rng.below(60);
            let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.next_f64()).collect()).unwrap();
            let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let g: Vec<f64> = r.iter().map(|v| -v).collect();
            let h = vec![1.0; n];
            let rows: Vec<usize> = (0..n).collect();
            let params = GainParams { max_depth: 1, lambda: 0.0, gamma: 0.0 };
            let tree = fit_gain_tree(&x, &g, &h, &rows, &[0, 1, 2], params);
            let TreeNode::Split { feature, threshold, left, right } = tree else {
                panic!("stump did not split")
            };
            assert_eq!((feature, threshold), variance_stump(&x, &r));
            // leaves hold the mean residual of their side
            let (l, _): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, feature)] <= threshold);
            let mean = l.iter().map(|&i| r[i]).sum::<f64>() / l.len() as f64;
            assert!((left.weight(&[f64::NEG_INFINITY; 3]) - mean).abs() < 1e-12);
            assert!(matches!(*right, TreeNode::Leaf { .. }));
        }
    }

    #[test]
    fn gamma_prunes_weak_splits() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = [0.1, 0.1, -0.1, -0.1];
        let h = [1.0; 4];
        let p = GainParams { max_depth: 3, lambda: 0.0, gamma: 10.0 };
        let t = fit_gain_tree(&x, &g, &h, &[0, 1, 2, 3], &[0], p);
        assert_eq!(t.leaves(), 1);
        let p = GainParams { gamma: 0.0, ..p };
        assert!(fit_gain_tree(&x, &g, &h, &[0, 1, 2, 3], &[0], p).leaves() > 1);
    }

    proptest! {
        #[test]
        fn gain_is_symmetric(gl in -1e3f64..1e3, hl in 0f64..1e3, gr in -1e3f64..1e3, hr in 0f64..1e3,
                             lambda in 0f64..10.0, gamma in 0f64..10.0) {
            prop_assert_eq!(
                xgb_split_gain(gl, hl, gr, hr, lambda, gamma),
                xgb_split_gain(gr, hr, gl, hl, lambda, gamma)
            );
        }
    }
}
