use serde::{Deserialize, Serialize};

use super::impurity::{impurity_unchecked, weighted_unchecked, Criterion};
use super::{check_xy, class_count, BaselineError};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafValue {
    Class(usize),
    Weight(f64),
}

/// A binary decision node. Leaves of classification trees carry per-class
/// counts; leaves of regression trees carry the sample count as `[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        counts: Vec<usize>,
        value: LeafValue,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf_for(&self, row: &[f64]) -> &TreeNode {
        let mut node = self;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } = node
        {
            node = if row[*feature] <= *threshold { left } else { right };
        }
        node
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    /// Leaf weight reached by `row`; class leaves count as zero.
    pub fn weight(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            TreeNode::Leaf {
                value: LeafValue::Weight(w),
                ..
            } => *w,
            _ => 0.0,
        }
    }

    /// Largest feature index referenced by any split.
    pub(crate) fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, left, right, .. } => {
                Some((*feature).max(left.max_feature().unwrap_or(0)).max(right.max_feature().unwrap_or(0)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Candidate features drawn per split; `None` uses every feature.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.min_samples_split < 2 {
            return Err(BaselineError::Param("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(BaselineError::Param("min_samples_leaf must be at least 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(BaselineError::Param("max_features must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
    pub num_features: usize,
    pub num_classes: usize,
    pub criterion: Criterion,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> usize {
        match self.root.leaf_for(row) {
            TreeNode::Leaf {
                value: LeafValue::Class(c),
                ..
            } => *c,
            _ => unreachable!("classification trees only hold class leaves"),
        }
    }

    pub fn predict_all(&self, x: &Matrix<f64>) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

/// Midpoint of two consecutive distinct values, kept strictly below `b`.
#[inline]
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let t = (a + b) / 2.0;
    if t < b {
        t
    } else {
        a
    }
}

/// Row indices of a node, one list per feature, each sorted by that feature.
pub(crate) struct Sorted(pub Vec<Vec<usize>>);

impl Sorted {
    pub fn new(x: &Matrix<f64>, rows: &[usize]) -> Self {
        Sorted(
            (0..x.cols())
                .map(|f| {
                    let mut v = rows.to_vec();
                    v.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
                    v
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[usize] {
        &self.0[0]
    }

    /// Stable partition of every list; `mark` must be sized to the row count.
    pub fn partition(self, x: &Matrix<f64>, feature: usize, threshold: f64, mark: &mut [bool]) -> (Sorted, Sorted) {
        for &i in &self.0[0] {
            mark[i] = x[(i, feature)] <= threshold;
        }
        let mut left = Vec::with_capacity(self.0.len());
        let mut right = Vec::with_capacity(self.0.len());
        for list in self.0 {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| mark[i]);
            left.push(l);
            right.push(r);
        }
        (Sorted(left), Sorted(right))
    }
}

/// Features considered at one split, ascending.
pub(crate) fn candidate_features(d: usize, max_features: Option<usize>, rng: Option<&mut SeededRng>) -> Vec<usize> {
    let mut all: Vec<usize> = (0..d).collect();
    match (max_features, rng) {
        (Some(k), Some(rng)) if k < d => {
            for i in 0..k {
                let j = i + rng.below(d - i);
                all.swap(i, j);
            }
            all.truncate(k);
            all.sort_unstable();
            all
        }
        (Some(k), None) if k < d => {
            all.truncate(k);
            all
        }
        _ => all,
    }
}

/// Lowest weighted child impurity over all admissible splits; ties keep the
/// earliest (feature, threshold) pair.
fn scan(
    x: &Matrix<f64>,
    y: &[usize],
    sorted: &Sorted,
    features: &[usize],
    classes: usize,
    min_leaf: usize,
    criterion: Criterion,
) -> Option<Split> {
    let n = sorted.len();
    let mut total = vec![0usize; classes];
    for &i in sorted.rows() {
        total[y[i]] += 1;
    }
    let mut best: Option<Split> = None;
    let mut left = vec![0usize; classes];
    let mut right = vec![0usize; classes];
    for &f in features {
        let list = &sorted.0[f];
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&total);
        for pos in 0..n - 1 {
            let i = list[pos];
            left[y[i]] += 1;
            right[y[i]] -= 1;
            let a = x[(i, f)];
            let b = x[(list[pos + 1], f)];
            let nl = pos + 1;
            if a == b || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let imp = weighted_unchecked(&left, nl, &right, n - nl, criterion);
            if best.map_or(true, |s| imp < s.impurity) {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(a, b),
                    impurity: imp,
                });
            }
        }
    }
    best
}

/// Exhaustive best split over all rows, or `None` when no candidate split
/// lowers the impurity.
pub fn best_split(x: &Matrix<f64>, y: &[usize], criterion: Criterion) -> Option<Split> {
    if x.rows() < 2 || x.rows() != y.len() {
        return None;
    }
    let classes = class_count(y);
    let rows: Vec<usize> = (0..x.rows()).collect();
    let sorted = Sorted::new(x, &rows);
    let features: Vec<usize> = (0..x.cols()).collect();
    let mut counts = vec![0usize; classes];
    y.iter().for_each(|&c| counts[c] += 1);
    let parent = impurity_unchecked(&counts, y.len(), criterion);
    scan(x, y, &sorted, &features, classes, 1, criterion).filter(|s| s.impurity < parent)
}

pub(crate) struct Grower<'a> {
    pub x: &'a Matrix<f64>,
    pub y: &'a [usize],
    pub classes: usize,
    pub params: TreeParams,
    pub mark: Vec<bool>,
}

impl Grower<'_> {
    pub fn grow(&mut self, sorted: Sorted, depth: usize, mut rng: Option<&mut SeededRng>) -> TreeNode {
        let mut counts = vec![0usize; self.classes];
        for &i in sorted.rows() {
            counts[self.y[i]] += 1;
        }
        let n = sorted.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let stop = pure || n < self.params.min_samples_split || self.params.max_depth.is_some_and(|m| depth >= m);
        let split = if stop {
            None
        } else {
            let features = candidate_features(self.x.cols(), self.params.max_features, rng.as_deref_mut());
            // An impure node takes its best split even when it does not lower
            // the impurity, so patterns like XOR remain learnable.
            scan(
                self.x,
                self.y,
                &sorted,
                &features,
                self.classes,
                self.params.min_samples_leaf,
                self.params.criterion,
            )
        };
        match split {
            None => TreeNode::Leaf {
                value: LeafValue::Class(majority(&counts)),
                counts,
            },
            Some(s) => {
                let (l, r) = sorted.partition(self.x, s.feature, s.threshold, &mut self.mark);
                let left = self.grow(l, depth + 1, rng.as_deref_mut());
                let right = self.grow(r, depth + 1, rng);
                TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
        }
    }
}

/// Index of the largest count, ties to the lowest index.
pub(crate) fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn fit_on_rows(
    x: &Matrix<f64>,
    y: &[usize],
    rows: &[usize],
    params: TreeParams,
    classes: usize,
    rng: Option<&mut SeededRng>,
) -> Tree {
    let mut grower = Grower {
        x,
        y,
        classes,
        params,
        mark: vec![false; x.rows()],
    };
    let root = grower.grow(Sorted::new(x, rows), 0, rng);
    Tree {
        root,
        num_features: x.cols(),
        num_classes: classes,
        criterion: params.criterion,
    }
}

pub fn fit_tree(x: &Matrix<f64>, y: &[usize], params: TreeParams) -> Result<Tree, BaselineError> {
    let classes = class_count(y);
    check_xy(x, y, classes)?;
    params.validate()?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(fit_on_rows(x, y, &rows, params, classes, None))
}

pub fn predict_tree(tree: &Tree, row: &[f64]) -> usize {
    tree.predict(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::impurity::{impurity, weighted_impurity};
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_data(rng: &mut SeededRng, n: usize, d: usize, levels: usize, classes: usize) -> (Matrix<f64>, Vec<usize>) {
        let data: Vec<f64> = (0..n * d).map(|_| rng.below(levels) as f64 / 2.0).collect();
        let y = (0..n).map(|_| rng.below(classes)).collect();
        (Matrix::from_vec(n, d, data).unwrap(), y)
    }

    /// Enumerates every (feature, midpoint) pair and re-counts both sides.
    fn brute_split(x: &Matrix<f64>, y: &[usize], c: Criterion) -> Option<Split> {
        let k = class_count(y);
        let mut parent = vec![0; k];
        y.iter().for_each(|&l| parent[l] += 1);
        let base = impurity(&parent, c).unwrap();
        let mut best: Option<Split> = None;
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = x.column(f).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (mut l, mut r) = (vec![0; k], vec![0; k]);
                for (i, &label) in y.iter().enumerate() {
                    if x[(i, f)] <= t {
                        l[label] += 1
                    } else {
                        r[label] += 1
                    }
                }
                let imp = weighted_impurity(&l, &r, c).unwrap();
                if best.map_or(true, |b| imp < b.impurity) {
                    best = Some(Split { feature: f, threshold: t, impurity: imp });
                }
            }
        }
        best.filter(|b| b.impurity < base)
    }

    #[test]
    fn separable_midpoint() {
        let x = mat(&[&[1.0], &[2.0], &[8.0], &[9.0]]);
        let s = best_split(&x, &[0, 0, 1, 1], Criterion::Gini).unwrap();
        assert_eq!((s.feature, s.threshold, s.impurity), (0, 5.0, 0.0));
    }

    #[test]
    fn identical_rows_have_no_split() {
        let x = mat(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        assert_eq!(best_split(&x, &[0, 1, 0], Criterion::Entropy), None);
    }

    #[test]
    fn best_split_matches_enumeration() {
        let mut rng = SeededRng::new(17);
        for trial in 0..30 {
            let n = 2 + rng.below(199);
            let (x, y) = random_data(&mut rng, n, 3, 12, 4);
            for c in Criterion::ALL {
                assert_eq!(best_split(&x, &y, c), brute_split(&x, &y, c), "trial {trial} {c}");
            }
        }
    }

    #[test]
    fn pure_input_is_one_leaf() {
        let x = mat(&[&[1.0], &[4.0], &[2.0]]);
        let t = fit_tree(&x, &[3, 3, 3], TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(t.predict(&[100.0]), 3);
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = mat(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let y = [0, 1, 1, 0];
        for c in Criterion::ALL {
            let t = fit_tree(&x, &y, TreeParams { criterion: c, ..Default::default() }).unwrap();
            assert_eq!(t.depth(), 2);
            assert_eq!(t.predict_all(&x), y);
        }
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let x = mat(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let p = TreeParams { max_depth: Some(0), ..Default::default() };
        let t = fit_tree(&x, &[2, 5, 5, 2], p).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(t.predict(&[1.0]), 2);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let mut rng = SeededRng::new(3);
        let (x, y) = random_data(&mut rng, 60, 2, 30, 3);
        let p = TreeParams { min_samples_leaf: 7, ..Default::default() };
        let t = fit_tree(&x, &y, p).unwrap();
        fn check(n: &TreeNode) {
            match n {
                TreeNode::Leaf { counts, .. } => assert!(counts.iter().sum::<usize>() >= 7),
                TreeNode::Split { left, right, .. } => {
                    check(left);
                    check(right)
                }
            }
        }
        check(&t.root);
    }

    #[test]
    fn errors() {
        let x = Matrix::<f64>::zeros(0, 2);
        assert_eq!(fit_tree(&x, &[], TreeParams::default()), Err(BaselineError::Empty));
        let x = mat(&[&[0.0]]);
        assert!(matches!(fit_tree(&x, &[0, 1], TreeParams::default()), Err(BaselineError::LengthMismatch { .. })));
        let p = TreeParams { min_samples_split: 1, ..Default::default() };
        assert!(fit_tree(&x, &[0], p).is_err());
    }

    proptest! {
        #[test]
        fn unbounded_tree_fits_consistent_data(seed in any::<u64>(), n in 1usize..80) {
            let mut rng = SeededRng::new(seed);
            let (x, mut y) = random_data(&mut rng, n, 3, 6, 5);
            // make duplicated feature rows agree on the label
            for i in 0..n {
                if let Some(j) = (0..i).find(|&j| x.row(j) == x.row(i)) {
                    y[i] = y[j];
                }
            }
            for c in Criterion::ALL {
                let t = fit_tree(&x, &y, TreeParams { criterion: c, ..Default::default() }).unwrap();
                prop_assert_eq!(t.predict_all(&x), y.clone());
            }
        }
    }
}
