use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{DenseParams, GruParams, LstmParams, RecurrentError};
use crate::dataio::NUM_CLASSES;
use crate::numerics::{Activation, Scalar, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gru,
    Lstm,
    #[serde(rename = "grulstm")]
    GruLstm,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Gru, Architecture::Lstm, Architecture::GruLstm];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Gru => "gru",
            Architecture::Lstm => "lstm",
            Architecture::GruLstm => "grulstm",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gru" => Ok(Architecture::Gru),
            "lstm" => Ok(Architecture::Lstm),
            "grulstm" => Ok(Architecture::GruLstm),
            other => Err(format!("unknown architecture `{other}`")),
        }
    }
}

/// Everything needed to build a [`Model`] from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub input_dim: usize,
    /// GRU units (ignored for `lstm`).
    pub gru_units: usize,
    /// LSTM units (ignored for `gru`).
    pub lstm_units: usize,
    pub dense_units: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub candidate_activation: Activation,
    pub dense_activation: Activation,
    pub output_activation: Activation,
}

impl ModelConfig {
    /// Layer sizes of the three reference architectures:
    ///
    /// | arch    | layers                                        |
    /// |---------|-----------------------------------------------|
    /// | gru     | GRU(200) → Dense(100) → Dense(8)              |
    /// | lstm    | LSTM(100) → Dropout(0.5) → Dense(100) → Dense(8) |
    /// | grulstm | GRU(100) → LSTM(100) → Dense(100) → Dense(8)  |
    ///
    /// A dropout layer always sits on the encoding; its rate defaults to 0.5.
    pub fn canonical(architecture: Architecture, input_dim: usize) -> Self {
        let gru_units = match architecture {
            Architecture::Gru => 200,
            _ => 100,
        };
        Self {
            architecture,
            input_dim,
            gru_units,
            lstm_units: 100,
            dense_units: 100,
            num_classes: NUM_CLASSES,
            dropout: 0.5,
            candidate_activation: Activation::Tanh,
            dense_activation: Activation::Linear,
            output_activation: Activation::Sigmoid,
        }
    }

    /// Same topology with every hidden width set to `units`.
    pub fn with_width(mut self, units: usize) -> Self {
        self.gru_units = units;
        self.lstm_units = units;
        self.dense_units = units;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }

    /// Zeroes the unit count of a recurrent kind the architecture does not use.
    pub fn normalized(mut self) -> Self {
        match self.architecture {
            Architecture::Gru => self.lstm_units = 0,
            Architecture::Lstm => self.gru_units = 0,
            Architecture::GruLstm => {}
        }
        self
    }

    /// Hidden sizes of the recurrent stack, bottom to top.
    pub fn recurrent_units(&self) -> Vec<usize> {
        match self.architecture {
            Architecture::Gru => vec![self.gru_units],
            Architecture::Lstm => vec![self.lstm_units],
            Architecture::GruLstm => vec![self.gru_units, self.lstm_units],
        }
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        let widths = self.recurrent_units();
        if self.input_dim == 0
            || self.dense_units == 0
            || self.num_classes == 0
            || widths.contains(&0)
        {
            return Err(RecurrentError::Config("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(RecurrentError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "type", rename_all = "lowercase")]
pub enum Layer<T> {
    Gru(GruParams<T>),
    Lstm(LstmParams<T>),
    Dropout { rate: f64 },
    Dense(DenseParams<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Gru(_) => "gru",
            Layer::Lstm(_) => "lstm",
            Layer::Dropout { .. } => "dropout",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, Layer::Gru(_) | Layer::Lstm(_))
    }

    /// `(input, output)` width; `None` for dropout, which preserves width.
    pub fn dims(&self) -> Option<(usize, usize)> {
        match self {
            Layer::Gru(p) => Some((p.input_dim(), p.hidden_dim())),
            Layer::Lstm(p) => Some((p.input_dim(), p.hidden_dim())),
            Layer::Dense(p) => Some((p.input_dim(), p.output_dim())),
            Layer::Dropout { .. } => None,
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Layer::Gru(p) => Layer::Gru(p.zeros_like()),
            Layer::Lstm(p) => Layer::Lstm(p.zeros_like()),
            Layer::Dense(p) => Layer::Dense(p.zeros_like()),
            Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        match self {
            Layer::Gru(p) => p.tensors().to_vec(),
            Layer::Lstm(p) => p.tensors().to_vec(),
            Layer::Dense(p) => p.tensors().to_vec(),
            Layer::Dropout { .. } => Vec::new(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        match self {
            Layer::Gru(p) => p.tensors_mut().into_iter().collect(),
            Layer::Lstm(p) => p.tensors_mut().into_iter().collect(),
            Layer::Dense(p) => p.tensors_mut().into_iter().collect(),
            Layer::Dropout { .. } => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        match self {
            Layer::Gru(p) => p.validate(),
            Layer::Lstm(p) => p.validate(),
            Layer::Dense(p) => p.validate(),
            Layer::Dropout { rate } if !(0.0..1.0).contains(rate) => Err(RecurrentError::Config(
                format!("dropout {rate} outside [0, 1)"),
            )),
            Layer::Dropout { .. } => Ok(()),
        }
    }
}

static NEXT_STATE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_state_id() -> u64 {
    NEXT_STATE_ID.fetch_add(1, Ordering::Relaxed)
}

/// A layered classifier: recurrent stack, dropout on the encoding, dense head.
///
/// Every mutable access to the parameters assigns a new state id, which
/// forward traces record so that a stale trace is rejected by the backward
/// pass.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    seed: u64,
    layers: Vec<Layer<T>>,
    state_id: u64,
}

impl<T: Scalar> PartialEq for Model<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.seed == other.seed && self.layers == other.layers
    }
}

impl<T: Scalar> Model<T> {
    /// Glorot-initialized model; all randomness derives from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, RecurrentError> {
        config.validate()?;
        let mut rng = SeededRng::derive(seed, "model.init");
        let mut layers = Vec::new();
        let mut width = config.input_dim;
        for (k, &units) in config.recurrent_units().iter().enumerate() {
            let is_gru = match config.architecture {
                Architecture::Gru => true,
                Architecture::Lstm => false,
                Architecture::GruLstm => k == 0,
            };
            layers.push(if is_gru {
                Layer::Gru(GruParams::init(width, units, config.candidate_activation, &mut rng)?)
            } else {
                Layer::Lstm(LstmParams::init(width, units, &mut rng)?)
            });
            width = units;
        }
        layers.push(Layer::Dropout {
            rate: config.dropout,
        });
        layers.push(Layer::Dense(DenseParams::init(
            width,
            config.dense_units,
            config.dense_activation,
            &mut rng,
        )?));
        layers.push(Layer::Dense(DenseParams::init(
            config.dense_units,
            config.num_classes,
            config.output_activation,
            &mut rng,
        )?));
        Self::from_layers(config, seed, layers)
    }

    /// Assembles a model from explicit layers, checking that widths chain.
    pub fn from_layers(
        config: ModelConfig,
        seed: u64,
        layers: Vec<Layer<T>>,
    ) -> Result<Self, RecurrentError> {
        let model = Self {
            config: config.normalized(),
            seed,
            layers,
            state_id: fresh_state_id(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        let mut width = self.config.input_dim;
        let mut seen_feedforward = false;
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.validate().map_err(|e| e.in_layer(idx))?;
            if layer.is_recurrent() && seen_feedforward {
                return Err(RecurrentError::Config(format!(
                    "layer {idx}: recurrent layer after the encoding"
                )));
            }
            if !layer.is_recurrent() {
                seen_feedforward = true;
            }
            if let Some((input, output)) = layer.dims() {
                if input != width {
                    return Err(RecurrentError::LayerChain {
                        layer: idx,
                        expected: width,
                        found: input,
                    });
                }
                width = output;
            }
        }
        if !self.layers.iter().any(Layer::is_recurrent) {
            return Err(RecurrentError::Config("model has no recurrent layer".into()));
        }
        if width != self.config.num_classes {
            return Err(RecurrentError::LayerChain {
                layer: self.layers.len(),
                expected: self.config.num_classes,
                found: width,
            });
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dropout(&self) -> f64 {
        self.layers
            .iter()
            .find_map(|l| match l {
                Layer::Dropout { rate } => Some(*rate),
                _ => None,
            })
            .unwrap_or(0.0)
    }

    /// Sets the rate of every dropout layer. Parameters are untouched.
    pub fn set_dropout(&mut self, rate: f64) -> Result<(), RecurrentError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(RecurrentError::Config(format!("dropout {rate} outside [0, 1)")));
        }
        self.config.dropout = rate;
        for layer in &mut self.layers {
            if let Layer::Dropout { rate: r } = layer {
                *r = rate;
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable access to the layers; invalidates outstanding traces.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.state_id = fresh_state_id();
        &mut self.layers
    }

    pub(crate) fn state_id(&self) -> u64 {
        self.state_id
    }

    /// Named parameter tensors, e.g. `layer0.gru.w_z`.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        named(&self.layers)
    }

    /// Mutable parameter tensors; invalidates outstanding traces.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        self.state_id = fresh_state_id();
        named_mut(&mut self.layers)
    }

    /// The same model with every parameter converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let mut out = Model::<U>::new(self.config.clone(), self.seed).expect("config was validated on construction");
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = U::lit(s.as_f64());
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Zero-valued gradient container shaped like this model.
    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }
}

fn named<T: Scalar>(layers: &[Layer<T>]) -> Vec<(String, &[T])> {
    layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            let kind = l.kind();
            l.tensors()
                .into_iter()
                .map(move |(n, t)| (format!("layer{i}.{kind}.{n}"), t))
        })
        .collect()
}

fn named_mut<T: Scalar>(layers: &mut [Layer<T>]) -> Vec<(String, &mut [T])> {
    layers
        .iter_mut()
        .enumerate()
        .flat_map(|(i, l)| {
            let kind = l.kind();
            l.tensors_mut()
                .into_iter()
                .map(move |(n, t)| (format!("layer{i}.{kind}.{n}"), t))
        })
        .collect()
}

/// Parameter gradients, one tensor per model tensor with matching shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn tensors(&self) -> Vec<(String, &[T])> {
        named(&self.layers)
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        named_mut(&mut self.layers)
    }

    /// `self += other`; both must come from the same model shape.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            assert_eq!(a.len(), b.len(), "gradient shape mismatch");
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for (_, t) in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= k;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| *v == T::zero()))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(m: &Model<f64>) -> Vec<(String, Option<(usize, usize)>)> {
        m.layers().iter().map(|l| (l.kind().to_string(), l.dims())).collect()
    }

    #[test]
    fn reference_architectures() {
        let gru = Model::<f64>::new(ModelConfig::canonical(Architecture::Gru, 1), 1).unwrap();
        assert_eq!(
            sizes(&gru),
            vec![
                ("gru".into(), Some((1, 200))),
                ("dropout".into(), None),
                ("dense".into(), Some((200, 100))),
                ("dense".into(), Some((100, 8))),
            ]
        );
        let lstm = Model::<f64>::new(ModelConfig::canonical(Architecture::Lstm, 1), 1).unwrap();
        assert_eq!(
            sizes(&lstm),
            vec![
                ("lstm".into(), Some((1, 100))),
                ("dropout".into(), None),
                ("dense".into(), Some((100, 100))),
                ("dense".into(), Some((100, 8))),
            ]
        );
        assert_eq!(lstm.dropout(), 0.5);
        let hybrid = Model::<f64>::new(ModelConfig::canonical(Architecture::GruLstm, 7), 1).unwrap();
        assert_eq!(
            sizes(&hybrid),
            vec![
                ("gru".into(), Some((7, 100))),
                ("lstm".into(), Some((100, 100))),
                ("dropout".into(), None),
                ("dense".into(), Some((100, 100))),
                ("dense".into(), Some((100, 8))),
            ]
        );
    }

    #[test]
    fn same_seed_same_weights() {
        let cfg = ModelConfig::canonical(Architecture::GruLstm, 1).with_width(6);
        let a = Model::<f64>::new(cfg.clone(), 9).unwrap();
        let b = Model::<f64>::new(cfg.clone(), 9).unwrap();
        let c = Model::<f64>::new(cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn broken_chain_is_rejected() {
        let cfg = ModelConfig::canonical(Architecture::Gru, 2).with_width(4);
        let m = Model::<f64>::new(cfg.clone(), 1).unwrap();
        let mut layers = m.layers().to_vec();
        layers[2] = Layer::Dense(DenseParams::zeros(5, 4, Activation::Linear));
        assert!(matches!(
            Model::from_layers(cfg, 1, layers),
            Err(RecurrentError::LayerChain { layer: 2, .. })
        ));
    }

    #[test]
    fn invalid_dropout() {
        let cfg = ModelConfig::canonical(Architecture::Gru, 2).with_dropout(1.0);
        assert!(Model::<f64>::new(cfg, 1).is_err());
    }

    #[test]
    fn mutation_changes_state_id() {
        let mut m = Model::<f64>::new(ModelConfig::canonical(Architecture::Lstm, 1).with_width(3), 2)
            .unwrap();
        let before = m.state_id();
        let _ = m.tensors_mut();
        assert_ne!(before, m.state_id());
        assert_eq!(m.clone().state_id(), m.state_id());
    }
}
