use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::boost::Booster;
use super::forest::Forest;
use super::svm::{svm_decision, SvmParams};
use super::tree::{LeafValue, Tree, TreeNode};
use crate::dataio::NormalizationStats;
use crate::numerics::Matrix;
use crate::training::{PersistError, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel {
    Tree(Tree),
    Forest(Forest),
    Booster(Booster),
    Svm(SvmParams),
}

impl BaselineModel {
    pub fn kind(&self) -> &'static str {
        match self {
            BaselineModel::Tree(_) => "tree",
            BaselineModel::Forest(_) => "forest",
            BaselineModel::Booster(_) => "booster",
            BaselineModel::Svm(_) => "svm",
        }
    }

    /// Class for one row; an SVM maps its +1 side to class 1 and −1 to 0.
    pub fn predict(&self, row: &[f64]) -> usize {
        match self {
            BaselineModel::Tree(t) => t.predict(row),
            BaselineModel::Forest(f) => f.predict(row),
            BaselineModel::Booster(b) => b.predict(row),
            BaselineModel::Svm(p) => usize::from(svm_decision(p, row).map_or(false, |s| s > 0)),
        }
    }

    pub fn predict_all(&self, x: &Matrix<f64>) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedBaseline {
    pub model: BaselineModel,
    pub stats: Option<NormalizationStats<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MinMax {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineFile {
    format_version: u32,
    kind: String,
    normalization: Option<MinMax>,
    model: Value,
}

fn malformed(e: impl std::fmt::Display) -> PersistError {
    PersistError::Malformed(e.to_string())
}

pub fn baseline_to_string(saved: &SavedBaseline) -> String {
    let model = match &saved.model {
        BaselineModel::Tree(t) => serde_json::to_value(t),
        BaselineModel::Forest(f) => serde_json::to_value(f),
        BaselineModel::Booster(b) => serde_json::to_value(b),
        BaselineModel::Svm(s) => serde_json::to_value(s),
    }
    .expect("baseline models serialize");
    let file = BaselineFile {
        format_version: FORMAT_VERSION,
        kind: saved.model.kind().into(),
        normalization: saved.stats.as_ref().map(|s| MinMax {
            min: s.min.clone(),
            max: s.max.clone(),
        }),
        model,
    };
    serde_json::to_string_pretty(&file).expect("baseline file serializes")
}

fn check_tree(node: &TreeNode, features: usize, classes: usize) -> Result<(), PersistError> {
    if node.max_feature().is_some_and(|f| f >= features) {
        return Err(PersistError::Shape(format!("split on a feature beyond the {features} inputs")));
    }
    fn leaves(n: &TreeNode, classes: usize) -> bool {
        match n {
            TreeNode::Leaf {
                value: LeafValue::Class(c),
                ..
            } => *c < classes,
            TreeNode::Leaf { .. } => true,
            TreeNode::Split { left, right, .. } => leaves(left, classes) && leaves(right, classes),
        }
    }
    if !leaves(node, classes) {
        return Err(PersistError::Shape(format!("leaf class beyond the {classes} classes")));
    }
    Ok(())
}

pub fn baseline_from_str(text: &str) -> Result<SavedBaseline, PersistError> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            PersistError::Truncated
        } else {
            malformed(e)
        }
    })?;
    let version = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing integer `format_version`"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(PersistError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let file: BaselineFile = serde_json::from_value(value).map_err(malformed)?;
    let model = match file.kind.as_str() {
        "tree" => {
            let t: Tree = serde_json::from_value(file.model).map_err(malformed)?;
            check_tree(&t.root, t.num_features, t.num_classes)?;
            BaselineModel::Tree(t)
        }
        "forest" => {
            let f: Forest = serde_json::from_value(file.model).map_err(malformed)?;
            if f.trees.is_empty() || f.trees.len() != f.tree_seeds.len() {
                return Err(PersistError::Shape("forest tree and seed counts disagree".into()));
            }
            for t in &f.trees {
                check_tree(&t.root, t.num_features, f.num_classes)?;
            }
            BaselineModel::Forest(f)
        }
        "booster" => {
            let b: Booster = serde_json::from_value(file.model).map_err(malformed)?;
            if b.priors.len() != b.num_classes || b.trees.len() != b.num_classes {
                return Err(PersistError::Shape("booster needs one prior and one ensemble per class".into()));
            }
            for t in b.trees.iter().flatten() {
                check_tree(t, b.num_features, b.num_classes)?;
            }
            BaselineModel::Booster(b)
        }
        "svm" => {
            let s: SvmParams = serde_json::from_value(file.model).map_err(malformed)?;
            s.validate().map_err(|e| PersistError::Shape(e.to_string()))?;
            BaselineModel::Svm(s)
        }
        other => return Err(malformed(format!("unknown learner kind `{other}`"))),
    };
    let stats = match file.normalization {
        Some(n) if n.min.len() != n.max.len() => {
            return Err(PersistError::Shape("normalization min/max lengths differ".into()));
        }
        Some(n) => Some(NormalizationStats { min: n.min, max: n.max }),
        None => None,
    };
    Ok(SavedBaseline { model, stats })
}

pub fn save_baseline(saved: &SavedBaseline, path: impl AsRef<Path>) -> Result<(), PersistError> {
    let path = path.as_ref();
    fs::write(path, baseline_to_string(saved)).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_baseline(path: impl AsRef<Path>) -> Result<SavedBaseline, PersistError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    baseline_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{fit_forest, fit_tree, fit_xgb, ForestParams, TreeParams, XgbParams};
    use crate::numerics::SeededRng;

    fn data() -> (Matrix<f64>, Vec<usize>) {
        let mut rng = SeededRng::new(21);
        let n = 90;
        let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.next_f64() * 10.0 - 3.3).collect()).unwrap();
        let y = (0..n).map(|i| usize::from(x[(i, 1)] > 1.7) + usize::from(x[(i, 2)] > 4.1)).collect();
        (x, y)
    }

    fn roundtrip(model: BaselineModel) {
        let (x, _) = data();
        let saved = SavedBaseline {
            model,
            stats: Some(NormalizationStats {
                min: vec![0.1, -2.0 / 3.0, 0.0],
                max: vec![1.0, 1e-9, 7.25],
            }),
        };
        let text = baseline_to_string(&saved);
        let back = baseline_from_str(&text).unwrap();
        assert_eq!(back, saved);
        assert_eq!(back.model.predict_all(&x), saved.model.predict_all(&x));
    }

    #[test]
    fn every_learner_round_trips() {
        let (x, y) = data();
        roundtrip(BaselineModel::Tree(fit_tree(&x, &y, TreeParams::default()).unwrap()));
        roundtrip(BaselineModel::Forest(
            fit_forest(&x, &y, ForestParams { trees: 4, ..Default::default() }).unwrap(),
        ));
        roundtrip(BaselineModel::Booster(
            fit_xgb(&x, &y, XgbParams { rounds: 5, ..Default::default() }).unwrap(),
        ));
        roundtrip(BaselineModel::Svm(SvmParams {
            support_vectors: vec![vec![0.1, 0.2, 0.3]],
            coefficients: vec![-0.7],
            bias: 0.05,
            sigma: 1.3,
        }));
    }

    #[test]
    fn file_is_self_describing() {
        let (x, y) = data();
        let t = fit_tree(&x, &y, TreeParams { max_depth: Some(2), ..Default::default() }).unwrap();
        let text = baseline_to_string(&SavedBaseline {
            model: BaselineModel::Tree(t),
            stats: None,
        });
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["kind"], "tree");
        assert_eq!(v["model"]["root"]["node"], "split");
        assert!(v["model"]["root"]["left"]["node"].is_string());
    }

    #[test]
    fn load_errors_are_distinct() {
        let (x, y) = data();
        let t = fit_tree(&x, &y, TreeParams::default()).unwrap();
        let text = baseline_to_string(&SavedBaseline {
            model: BaselineModel::Tree(t),
            stats: None,
        });
        assert!(matches!(baseline_from_str(&text[..text.len() / 2]), Err(PersistError::Truncated)));
        let v2 = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(baseline_from_str(&v2), Err(PersistError::Version { found: 2, .. })));
        let bad = text.replacen("\"kind\": \"tree\"", "\"kind\": \"shrub\"", 1);
        assert!(matches!(baseline_from_str(&bad), Err(PersistError::Malformed(_))));
        let shape = text.replacen("\"num_features\": 3", "\"num_features\": 1", 1);
        assert!(matches!(baseline_from_str(&shape), Err(PersistError::Shape(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_baseline(dir.path().join("missing.json")), Err(PersistError::Io { .. })));
    }
}
