use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::impurity::Criterion;
use super::tree::{fit_on_rows, Tree, TreeParams};
use super::{check_xy, class_count, BaselineError};
use crate::numerics::{derive_seed, Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means round(√d).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Seed each tree's bootstrap and feature draws came from.
    pub tree_seeds: Vec<u64>,
    pub max_features: usize,
    pub num_classes: usize,
}

impl Forest {
    /// Per-tree class predictions for one row.
    pub fn votes(&self, row: &[f64]) -> Vec<usize> {
        self.trees.iter().map(|t| t.predict(row)).collect()
    }

    /// Plurality vote, ties to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut tally = vec![0usize; self.num_classes];
        for v in self.votes(row) {
            tally[v] += 1;
        }
        super::tree::majority(&tally)
    }

    pub fn predict_all(&self, x: &Matrix<f64>) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

pub fn fit_forest(x: &Matrix<f64>, y: &[usize], params: ForestParams) -> Result<Forest, BaselineError> {
    let classes = class_count(y);
    check_xy(x, y, classes)?;
    if params.trees == 0 {
        return Err(BaselineError::Param("a forest needs at least one tree".into()));
    }
    let d = x.cols();
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
        .min(d.max(1));
    let tree_params = TreeParams {
        criterion: params.criterion,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(max_features),
    };
    tree_params.validate()?;
    let n = x.rows();
    let seeds: Vec<u64> = (0..params.trees)
        .map(|b| derive_seed(params.seed, &format!("forest.tree.{b}")))
        .collect();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = SeededRng::new(s);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            fit_on_rows(x, y, &rows, tree_params, classes, Some(&mut rng))
        })
        .collect();
    Ok(Forest {
        trees,
        tree_seeds: seeds,
        max_features,
        num_classes: classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::tree::{fit_tree, LeafValue, TreeNode};

    fn data(seed: u64, n: usize) -> (Matrix<f64>, Vec<usize>) {
        let mut rng = SeededRng::new(seed);
        let x: Vec<f64> = (0..n * 7).map(|_| rng.next_f64()).collect();
        let x = Matrix::from_vec(n, 7, x).unwrap();
        let y = (0..n).map(|i| usize::from(x[(i, 0)] + x[(i, 3)] > 1.0) + 2 * usize::from(x[(i, 5)] > 0.7)).collect();
        (x, y)
    }

    fn stump(class: usize) -> Tree {
        Tree {
            root: TreeNode::Leaf {
                counts: vec![],
                value: LeafValue::Class(class),
            },
            num_features: 1,
            num_classes: 8,
            criterion: Criterion::Gini,
        }
    }

    #[test]
    fn single_unbootstrapped_tree_equals_fit_tree() {
        let (x, y) = data(1, 150);
        let p = ForestParams {
            trees: 1,
            bootstrap: false,
            max_features: Some(7),
            ..Default::default()
        };
        let f = fit_forest(&x, &y, p).unwrap();
        let t = fit_tree(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(f.trees[0].root, t.root);
    }

    #[test]
    fn tied_vote_goes_to_lower_class() {
        let f = Forest {
            trees: vec![stump(1), stump(1), stump(2), stump(2)],
            tree_seeds: vec![0; 4],
            max_features: 1,
            num_classes: 8,
        };
        assert_eq!(f.predict(&[0.0]), 1);
        let same = Forest {
            trees: vec![stump(6); 5],
            tree_seeds: vec![0; 5],
            max_features: 1,
            num_classes: 8,
        };
        assert_eq!(same.predict(&[0.0]), 6);
    }

    #[test]
    fn vote_matches_tally() {
        let (x, y) = data(2, 200);
        let f = fit_forest(&x, &y, ForestParams { trees: 15, seed: 9, ..Default::default() }).unwrap();
        assert_eq!(f.max_features, 3);
        let (probe, _) = data(3, 100);
        for row in probe.iter_rows() {
            let votes = f.votes(row);
            let mut best = (0usize, 0usize);
            for c in 0..8 {
                let k = votes.iter().filter(|&&v| v == c).count();
                if k > best.1 {
                    best = (c, k);
                }
            }
            assert_eq!(f.predict(row), best.0);
        }
    }

    #[test]
    fn seeded_and_order_independent() {
        let (x, y) = data(4, 120);
        let p = ForestParams { trees: 8, seed: 5, ..Default::default() };
        let a = fit_forest(&x, &y, p).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| fit_forest(&x, &y, p).unwrap());
        assert_eq!(a, b);
        let c = fit_forest(&x, &y, ForestParams { seed: 6, ..p }).unwrap();
        assert_ne!(a, c);
        // tree b's seed does not depend on how many trees are grown
        let d = fit_forest(&x, &y, ForestParams { trees: 3, ..p }).unwrap();
        assert_eq!(d.trees[..], a.trees[..3]);
    }

    #[test]
    fn zero_trees_rejected() {
        let (x, y) = data(1, 10);
        assert!(fit_forest(&x, &y, ForestParams { trees: 0, ..Default::default() }).is_err());
    }
}
