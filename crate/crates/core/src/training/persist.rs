use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{NormalizationStats, SequenceMode};
use crate::numerics::{Activation, Matrix, Scalar, Vector};
use crate::recurrent::{Architecture, DenseParams, GruParams, Layer, LstmParams, Model, ModelConfig};

pub const FORMAT_VERSION: u32 = 1;
const KIND: &str = "recurrent";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported model file version {found} (this build reads version {expected})")]
    Version { found: u64, expected: u32 },
    #[error("model file is truncated")]
    Truncated,
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("inconsistent shapes in model file: {0}")]
    Shape(String),
}

/// A trained model together with everything needed to apply it to raw rows.
#[derive(Debug, Clone)]
pub struct SavedModel<T> {
    pub model: Model<T>,
    pub stats: NormalizationStats<T>,
    /// How rows were turned into sequences during training, if recorded.
    pub sequence: Option<SequenceMode>,
}

#[derive(Serialize, Deserialize)]
struct Activations {
    candidate: Activation,
    dense: Activation,
    output: Activation,
}

#[derive(Serialize, Deserialize)]
struct MinMax {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Tensor {
    Matrix(Vec<Vec<f64>>),
    Vector(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum LayerRecord {
    Gru {
        input_dim: usize,
        units: usize,
        weights: BTreeMap<String, Tensor>,
    },
    Lstm {
        input_dim: usize,
        units: usize,
        weights: BTreeMap<String, Tensor>,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        input_dim: usize,
        units: usize,
        activation: Activation,
        weights: BTreeMap<String, Tensor>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    kind: String,
    architecture: Architecture,
    input_dim: usize,
    hidden_sizes: Vec<usize>,
    dense_units: usize,
    num_classes: usize,
    dropout: f64,
    seed: u64,
    activations: Activations,
    sequence: Option<SequenceMode>,
    normalization: MinMax,
    layers: Vec<LayerRecord>,
}

impl<T: Scalar> PartialEq for SavedModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model && self.stats == other.stats && self.sequence == other.sequence
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn matrix_record<T: Scalar>(m: &Matrix<T>) -> Tensor {
    Tensor::Matrix(m.iter_rows().map(to_f64).collect())
}

fn vector_record<T: Scalar>(v: &Vector<T>) -> Tensor {
    Tensor::Vector(to_f64(v.as_slice()))
}

fn weights<T: Scalar>(mats: &[(&str, &Matrix<T>)], vecs: &[(&str, &Vector<T>)]) -> BTreeMap<String, Tensor> {
    mats.iter()
        .map(|(n, m)| (n.to_string(), matrix_record(m)))
        .chain(vecs.iter().map(|(n, v)| (n.to_string(), vector_record(v))))
        .collect()
}

fn layer_record<T: Scalar>(l: &Layer<T>) -> LayerRecord {
    match l {
        Layer::Gru(p) => LayerRecord::Gru {
            input_dim: p.input_dim(),
            units: p.hidden_dim(),
            weights: weights(
                &[("w_z", &p.w_z), ("w_r", &p.w_r), ("w_h", &p.w_h), ("u_z", &p.u_z), ("u_r", &p.u_r), ("u_h", &p.u_h)],
                &[("b_z", &p.b_z), ("b_r", &p.b_r), ("b_h", &p.b_h)],
            ),
        },
        Layer::Lstm(p) => LayerRecord::Lstm {
            input_dim: p.input_dim(),
            units: p.hidden_dim(),
            weights: weights(
                &[
                    ("w_f", &p.w_f),
                    ("w_i", &p.w_i),
                    ("w_g", &p.w_g),
                    ("w_o", &p.w_o),
                    ("u_f", &p.u_f),
                    ("u_i", &p.u_i),
                    ("u_g", &p.u_g),
                    ("u_o", &p.u_o),
                ],
                &[("b_f", &p.b_f), ("b_i", &p.b_i), ("b_g", &p.b_g), ("b_o", &p.b_o)],
            ),
        },
        Layer::Dropout { rate } => LayerRecord::Dropout { rate: *rate },
        Layer::Dense(p) => LayerRecord::Dense {
            input_dim: p.input_dim(),
            units: p.output_dim(),
            activation: p.activation,
            weights: weights(&[("w", &p.w)], &[("b", &p.b)]),
        },
    }
}

pub fn model_to_string<T: Scalar>(saved: &SavedModel<T>) -> String {
    let m = &saved.model;
    let c = m.config();
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: KIND.into(),
        architecture: c.architecture,
        input_dim: c.input_dim,
        hidden_sizes: c.recurrent_units(),
        dense_units: c.dense_units,
        num_classes: c.num_classes,
        dropout: m.dropout(),
        seed: m.seed(),
        activations: Activations {
            candidate: c.candidate_activation,
            dense: c.dense_activation,
            output: c.output_activation,
        },
        sequence: saved.sequence,
        normalization: MinMax {
            min: to_f64(&saved.stats.min),
            max: to_f64(&saved.stats.max),
        },
        layers: m.layers().iter().map(layer_record).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model records always serialize");
    s.push('\n');
    s
}

/// Copies a named tensor from the file into `slot`, checking its shape.
fn fill<T: Scalar>(
    layer: usize,
    w: &mut BTreeMap<String, Tensor>,
    name: &str,
    shape: (usize, usize),
    slot: &mut [T],
    is_matrix: bool,
) -> Result<(), PersistError> {
    let t = w
        .remove(name)
        .ok_or_else(|| PersistError::Malformed(format!("layer {layer}: missing tensor `{name}`")))?;
    let flat = match (t, is_matrix) {
        (Tensor::Matrix(rows), true) => {
            let cols = rows.first().map_or(0, Vec::len);
            if rows.len() != shape.0 || rows.iter().any(|r| r.len() != cols) || cols != shape.1 {
                return Err(PersistError::Shape(format!(
                    "layer {layer}: `{name}` is {}x{cols}, expected {}x{}",
                    rows.len(),
                    shape.0,
                    shape.1
                )));
            }
            rows.into_iter().flatten().collect::<Vec<_>>()
        }
        (Tensor::Vector(v), false) => {
            if v.len() != shape.0 {
                return Err(PersistError::Shape(format!(
                    "layer {layer}: `{name}` has length {}, expected {}",
                    v.len(),
                    shape.0
                )));
            }
            v
        }
        // an empty matrix parses as a vector and vice versa
        _ => {
            return Err(PersistError::Shape(format!(
                "layer {layer}: `{name}` has the wrong rank"
            )))
        }
    };
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(PersistError::Malformed(format!("layer {layer}: non-finite value in `{name}`")));
    }
    for (s, v) in slot.iter_mut().zip(flat) {
        *s = T::lit(v);
    }
    Ok(())
}

/// Fills every tensor of a zero-initialized layer; names starting with `b` are vectors.
fn fill_layer<T: Scalar>(
    idx: usize,
    mut layer: Layer<T>,
    mut w: BTreeMap<String, Tensor>,
    input: usize,
    units: usize,
) -> Result<Layer<T>, PersistError> {
    for (name, slot) in layer.tensors_mut() {
        let (shape, is_matrix) = match name.as_bytes()[0] {
            b'b' => ((units, 1), false),
            b'u' => ((units, units), true),
            _ => ((units, input), true),
        };
        fill(idx, &mut w, name, shape, slot, is_matrix)?;
    }
    if let Some(extra) = w.keys().next() {
        return Err(PersistError::Malformed(format!("layer {idx}: unexpected tensor `{extra}`")));
    }
    Ok(layer)
}

fn build_layer<T: Scalar>(idx: usize, r: LayerRecord, candidate: Activation) -> Result<Layer<T>, PersistError> {
    match r {
        LayerRecord::Gru { input_dim, units, weights } => {
            let mut p = GruParams::zeros(input_dim, units);
            p.candidate_activation = candidate;
            fill_layer(idx, Layer::Gru(p), weights, input_dim, units)
        }
        LayerRecord::Lstm { input_dim, units, weights } => {
            fill_layer(idx, Layer::Lstm(LstmParams::zeros(input_dim, units)), weights, input_dim, units)
        }
        LayerRecord::Dense {
            input_dim,
            units,
            activation,
            weights,
        } => fill_layer(idx, Layer::Dense(DenseParams::zeros(input_dim, units, activation)), weights, input_dim, units),
        LayerRecord::Dropout { rate } => Ok(Layer::Dropout { rate }),
    }
}

pub fn model_from_str<T: Scalar>(text: &str) -> Result<SavedModel<T>, PersistError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            PersistError::Truncated
        } else {
            PersistError::Malformed(e.to_string())
        }
    })?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| PersistError::Malformed("missing integer `format_version`".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(PersistError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| PersistError::Malformed(e.to_string()))?;
    if file.kind != KIND {
        return Err(PersistError::Malformed(format!("expected a `{KIND}` model, found `{}`", file.kind)));
    }

    let mut config = ModelConfig::canonical(file.architecture, file.input_dim);
    let expected_depth = config.recurrent_units().len();
    if file.hidden_sizes.len() != expected_depth {
        return Err(PersistError::Shape(format!(
            "{} expects {expected_depth} hidden sizes, file lists {}",
            file.architecture,
            file.hidden_sizes.len()
        )));
    }
    match file.architecture {
        Architecture::Gru => config.gru_units = file.hidden_sizes[0],
        Architecture::Lstm => config.lstm_units = file.hidden_sizes[0],
        Architecture::GruLstm => {
            config.gru_units = file.hidden_sizes[0];
            config.lstm_units = file.hidden_sizes[1];
        }
    }
    config.dense_units = file.dense_units;
    config.num_classes = file.num_classes;
    config.dropout = file.dropout;
    config.candidate_activation = file.activations.candidate;
    config.dense_activation = file.activations.dense;
    config.output_activation = file.activations.output;

    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, r)| build_layer(i, r, config.candidate_activation))
        .collect::<Result<Vec<_>, _>>()?;

    // the header must describe the layers exactly
    let reference: Model<T> = Model::from_layers(config.clone(), file.seed, layers.clone())
        .map_err(|e| PersistError::Shape(e.to_string()))?;
    let widths: Vec<usize> = reference
        .layers()
        .iter()
        .filter(|l| l.is_recurrent())
        .filter_map(|l| l.dims().map(|d| d.1))
        .collect();
    if widths != file.hidden_sizes {
        return Err(PersistError::Shape(format!(
            "hidden sizes {:?} do not match recurrent layers {:?}",
            file.hidden_sizes, widths
        )));
    }
    let kinds: Vec<&str> = reference.layers().iter().map(|l| l.kind()).collect();
    let template = Model::<T>::new(config.clone(), 0).map_err(|e| PersistError::Shape(e.to_string()))?;
    let expected: Vec<&str> = template.layers().iter().map(|l| l.kind()).collect();
    if kinds != expected || template.layers().iter().zip(reference.layers()).any(|(a, b)| a.dims() != b.dims()) {
        return Err(PersistError::Shape(format!(
            "layer stack {kinds:?} does not match the declared {} architecture",
            file.architecture
        )));
    }

    let n = &file.normalization;
    if n.min.len() != n.max.len() || n.min.len() != crate::dataio::NUM_FEATURES {
        return Err(PersistError::Shape(format!(
            "normalization has {}/{} min/max entries, expected {}",
            n.min.len(),
            n.max.len(),
            crate::dataio::NUM_FEATURES
        )));
    }
    Ok(SavedModel {
        model: reference,
        stats: NormalizationStats {
            min: n.min.iter().map(|&v| T::lit(v)).collect(),
            max: n.max.iter().map(|&v| T::lit(v)).collect(),
        },
        sequence: file.sequence,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_saved<T: Scalar>(saved: &SavedModel<T>, path: impl AsRef<Path>) -> Result<(), PersistError> {
    let path = path.as_ref();
    fs::write(path, model_to_string(saved)).map_err(io_err(path))
}

pub fn load_saved<T: Scalar>(path: impl AsRef<Path>) -> Result<SavedModel<T>, PersistError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    model_from_str(&text)
}

pub fn save_model<T: Scalar>(
    m: &Model<T>,
    stats: &NormalizationStats<T>,
    path: impl AsRef<Path>,
) -> Result<(), PersistError> {
    save_saved(
        &SavedModel {
            model: m.clone(),
            stats: stats.clone(),
            sequence: None,
        },
        path,
    )
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<(Model<T>, NormalizationStats<T>), PersistError> {
    let s = load_saved(path)?;
    Ok((s.model, s.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use crate::recurrent::predict_scores;
    use crate::dataio::SequenceSample;

    fn saved(arch: Architecture) -> SavedModel<f64> {
        let mut m = Model::new(ModelConfig::canonical(arch, 7).with_width(4), 11).unwrap();
        // give biases non-zero values so they are exercised too
        let mut rng = SeededRng::new(1);
        for (_, t) in m.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.uniform(-0.1, 0.1);
            }
        }
        SavedModel {
            model: m,
            stats: NormalizationStats {
                min: vec![-1.5, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
                max: vec![1.0 / 3.0, 1.0, 2.0, 255.0, 255.0, 255.0, 1e300],
            },
            sequence: Some(SequenceMode::Window(3)),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for arch in Architecture::ALL {
            let s = saved(arch);
            let text = model_to_string(&s);
            let back: SavedModel<f64> = model_from_str(&text).unwrap();
            assert_eq!(back, s);
            let mut rng = SeededRng::new(3);
            for _ in 0..100 {
                let x = SequenceSample {
                    steps: (0..3).map(|_| Vector::from((0..7).map(|_| rng.normal()).collect::<Vec<_>>())).collect(),
                    target: 0,
                };
                let a = predict_scores(&s.model, &x).unwrap();
                let b = predict_scores(&back.model, &x).unwrap();
                assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }

    #[test]
    fn file_is_self_describing() {
        let text = model_to_string(&saved(Architecture::GruLstm));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["architecture"], "grulstm");
        assert_eq!(v["input_dim"], 7);
        assert_eq!(v["hidden_sizes"], serde_json::json!([4, 4]));
        assert_eq!(v["seed"], 11);
        assert_eq!(v["normalization"]["min"].as_array().unwrap().len(), 7);
        // weights as row-major nested lists
        assert_eq!(v["layers"][0]["weights"]["w_z"].as_array().unwrap().len(), 4);
        assert_eq!(v["layers"][0]["weights"]["w_z"][0].as_array().unwrap().len(), 7);
    }

    #[test]
    fn distinct_load_errors() {
        let text = model_to_string(&saved(Architecture::GruLstm));
        let err = |t: &str| model_from_str::<f64>(t).unwrap_err();

        assert!(matches!(err(&text[..text.len() / 2]), PersistError::Truncated));
        assert!(matches!(err(""), PersistError::Truncated));
        assert!(matches!(
            err(&text.replacen("\"format_version\": 1", "\"format_version\": 2", 1)),
            PersistError::Version { found: 2, .. }
        ));
        assert!(matches!(err(&text.replacen("\"input_dim\": 7", "\"input_dim\": 5", 1)), PersistError::Shape(_)));
        assert!(matches!(err(&text.replacen("\"units\": 4", "\"units\": 5", 1)), PersistError::Shape(_)));
        assert!(matches!(
            err(&text.replacen("\"hidden_sizes\": [\n    4,", "\"hidden_sizes\": [\n    6,", 1)),
            PersistError::Shape(_)
        ));
        assert!(matches!(err(&text.replacen("\"kind\": \"recurrent\"", "\"kind\": \"tree\"", 1)), PersistError::Malformed(_)));
        assert!(matches!(err("[1, 2]"), PersistError::Malformed(_)));
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let s = saved(Architecture::Lstm);
        save_model(&s.model, &s.stats, &path).unwrap();
        let (m, stats) = load_model::<f64>(&path).unwrap();
        assert_eq!(m, s.model);
        assert_eq!(stats, s.stats);
        assert!(matches!(load_model::<f64>(dir.path().join("missing.json")), Err(PersistError::Io { .. })));
    }

    #[test]
    fn f32_models_round_trip() {
        let m = Model::<f32>::new(ModelConfig::canonical(Architecture::Gru, 1).with_width(3), 2).unwrap();
        let s = SavedModel {
            model: m,
            stats: NormalizationStats {
                min: vec![0.0; 7],
                max: vec![1.0; 7],
            },
            sequence: None,
        };
        let back: SavedModel<f32> = model_from_str(&model_to_string(&s)).unwrap();
        assert_eq!(back, s);
    }
}
