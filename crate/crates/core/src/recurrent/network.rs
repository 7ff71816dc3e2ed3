use super::dense::{dense_backward, dense_forward};
use super::gru::{gru_step, gru_step_backward, GruStepTrace};
use super::lstm::{lstm_step, lstm_step_backward, LstmStepTrace};
use super::{Gradients, Layer, Model, RecurrentError};
use crate::dataio::SequenceSample;
use crate::numerics::{Scalar, SeededRng, Vector};

/// Per-layer record of a forward pass.
#[derive(Debug, Clone)]
pub enum LayerTrace<T> {
    Gru(Vec<GruStepTrace<T>>),
    Lstm(Vec<LstmStepTrace<T>>),
    /// Scaled keep-mask; `None` when dropout was inactive.
    Dropout(Option<Vector<T>>),
    Dense { input: Vector<T>, output: Vector<T> },
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    state_id: u64,
    steps: usize,
    pub layers: Vec<LayerTrace<T>>,
    /// Final hidden state of the recurrent stack.
    pub encoding: Vector<T>,
    pub scores: Vector<T>,
}

impl<T> ForwardTrace<T> {
    /// Sequence length the trace was recorded over.
    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }
}

/// Runs a sequence through the model and returns the class scores.
///
/// Hidden and cell states start at zero. With `training` set, dropout masks
/// are drawn from `rng` (inverted dropout, survivors scaled by `1/(1-rate)`);
/// otherwise dropout is the identity and `rng` is not touched.
pub fn model_forward<T: Scalar>(
    m: &Model<T>,
    s: &SequenceSample<T>,
    training: bool,
    rng: &mut SeededRng,
) -> Result<(Vector<T>, ForwardTrace<T>), RecurrentError> {
    if s.is_empty() {
        return Err(RecurrentError::EmptySequence);
    }
    if let Some(bad) = s.steps.iter().find(|x| x.len() != m.input_dim()) {
        return Err(RecurrentError::Input {
            what: "sequence step",
            expected: m.input_dim(),
            found: bad.len(),
        });
    }

    let mut seq: Vec<Vector<T>> = s.steps.clone();
    let mut vec: Option<Vector<T>> = None;
    let mut encoding = None;
    let mut traces = Vec::with_capacity(m.layers().len());

    for layer in m.layers() {
        match layer {
            Layer::Gru(p) => {
                let mut h = Vector::zeros(p.hidden_dim());
                let mut steps = Vec::with_capacity(seq.len());
                let mut out = Vec::with_capacity(seq.len());
                for x in &seq {
                    let (h_next, tr) = gru_step(p, x, &h)?;
                    h = h_next;
                    out.push(h.clone());
                    steps.push(tr);
                }
                seq = out;
                traces.push(LayerTrace::Gru(steps));
            }
            Layer::Lstm(p) => {
                let mut h = Vector::zeros(p.hidden_dim());
                let mut c = Vector::zeros(p.hidden_dim());
                let mut steps = Vec::with_capacity(seq.len());
                let mut out = Vec::with_capacity(seq.len());
                for x in &seq {
                    let (h_next, c_next, tr) = lstm_step(p, x, &h, &c)?;
                    h = h_next;
                    c = c_next;
                    out.push(h.clone());
                    steps.push(tr);
                }
                seq = out;
                traces.push(LayerTrace::Lstm(steps));
            }
            Layer::Dropout { rate } => {
                let input = take_vector(&mut vec, &seq, &mut encoding);
                if training && *rate > 0.0 {
                    let scale = T::lit(1.0 / (1.0 - rate));
                    let mask: Vector<T> = (0..input.len())
                        .map(|_| if rng.bernoulli(1.0 - rate) { scale } else { T::zero() })
                        .collect::<Vec<_>>()
                        .into();
                    vec = Some(input.hadamard(&mask)?);
                    traces.push(LayerTrace::Dropout(Some(mask)));
                } else {
                    vec = Some(input);
                    traces.push(LayerTrace::Dropout(None));
                }
            }
            Layer::Dense(p) => {
                let input = take_vector(&mut vec, &seq, &mut encoding);
                let output = dense_forward(p, &input)?;
                vec = Some(output.clone());
                traces.push(LayerTrace::Dense { input, output });
            }
        }
    }

    let scores = vec.unwrap_or_else(|| seq.last().cloned().unwrap());
    let trace = ForwardTrace {
        state_id: m.state_id(),
        steps: s.len(),
        layers: traces,
        encoding: encoding.unwrap_or_else(|| seq.last().cloned().unwrap()),
        scores: scores.clone(),
    };
    Ok((scores, trace))
}

/// The current feed-forward vector, or the recurrent encoding on first use.
fn take_vector<T: Scalar>(
    vec: &mut Option<Vector<T>>,
    seq: &[Vector<T>],
    encoding: &mut Option<Vector<T>>,
) -> Vector<T> {
    match vec.take() {
        Some(v) => v,
        None => {
            let e = seq.last().cloned().expect("non-empty sequence");
            *encoding = Some(e.clone());
            e
        }
    }
}

/// Exact reverse-mode gradients of a loss through the model given
/// `upstream = dLoss/dScores`. Gradients are accumulated over all steps.
pub fn model_backward<T: Scalar>(
    m: &Model<T>,
    trace: &ForwardTrace<T>,
    upstream: &Vector<T>,
) -> Result<Gradients<T>, RecurrentError> {
    model_backward_truncated(m, trace, upstream, None)
}

/// Like [`model_backward`], but backpropagates through at most `truncation`
/// trailing steps of the sequence.
pub fn model_backward_truncated<T: Scalar>(
    m: &Model<T>,
    trace: &ForwardTrace<T>,
    upstream: &Vector<T>,
    truncation: Option<usize>,
) -> Result<Gradients<T>, RecurrentError> {
    let mut grads = m.zero_gradients();
    model_backward_into(m, trace, upstream, truncation, &mut grads)?;
    Ok(grads)
}

/// Backward pass that adds into an existing gradient buffer shaped like `m`.
pub fn model_backward_into<T: Scalar>(
    m: &Model<T>,
    trace: &ForwardTrace<T>,
    upstream: &Vector<T>,
    truncation: Option<usize>,
    grads: &mut Gradients<T>,
) -> Result<(), RecurrentError> {
    if trace.state_id != m.state_id() {
        return Err(RecurrentError::StaleTrace);
    }
    if upstream.len() != m.num_classes() {
        return Err(RecurrentError::Input {
            what: "upstream gradient",
            expected: m.num_classes(),
            found: upstream.len(),
        });
    }
    let steps = trace.len();
    let first_step = steps - truncation.unwrap_or(steps).min(steps);
    if grads.layers().len() != m.layers().len() {
        return Err(RecurrentError::Config("gradient buffer shaped for another model".into()));
    }

    let mut d_vec: Option<Vector<T>> = Some(upstream.clone());
    let mut d_seq: Vec<Option<Vector<T>>> = Vec::new();

    for ((layer, lt), g) in m
        .layers()
        .iter()
        .zip(&trace.layers)
        .zip(grads.layers_mut().iter_mut())
        .rev()
    {
        match (layer, lt, g) {
            (Layer::Dense(p), LayerTrace::Dense { input, output }, Layer::Dense(gp)) => {
                let d = d_vec.take().expect("dense layers follow the encoding");
                d_vec = Some(dense_backward(p, input, output, &d, gp)?);
            }
            (Layer::Dropout { .. }, LayerTrace::Dropout(mask), _) => {
                if let Some(mask) = mask {
                    let d = d_vec.take().expect("dropout follows the encoding");
                    d_vec = Some(d.hadamard(mask)?);
                }
            }
            (Layer::Gru(p), LayerTrace::Gru(tr), Layer::Gru(gp)) => {
                seed_sequence_gradient(&mut d_seq, &mut d_vec, steps);
                let mut dh_next = Vector::zeros(p.hidden_dim());
                let mut d_inputs = vec![None; steps];
                for t in (first_step..steps).rev() {
                    if let Some(d) = &d_seq[t] {
                        dh_next.add_assign(d)?;
                    }
                    let (dx, dh_prev) = gru_step_backward(p, &tr[t], &dh_next, gp)?;
                    d_inputs[t] = Some(dx);
                    dh_next = dh_prev;
                }
                d_seq = d_inputs;
            }
            (Layer::Lstm(p), LayerTrace::Lstm(tr), Layer::Lstm(gp)) => {
                seed_sequence_gradient(&mut d_seq, &mut d_vec, steps);
                let mut dh_next = Vector::zeros(p.hidden_dim());
                let mut dc_next = Vector::zeros(p.hidden_dim());
                let mut d_inputs = vec![None; steps];
                for t in (first_step..steps).rev() {
                    if let Some(d) = &d_seq[t] {
                        dh_next.add_assign(d)?;
                    }
                    let (dx, dh_prev, dc_prev) =
                        lstm_step_backward(p, &tr[t], &dh_next, &dc_next, gp)?;
                    d_inputs[t] = Some(dx);
                    dh_next = dh_prev;
                    dc_next = dc_prev;
                }
                d_seq = d_inputs;
            }
            _ => return Err(RecurrentError::StaleTrace),
        }
    }
    Ok(())
}

/// Moves the encoding gradient onto the last step of a per-step gradient list.
fn seed_sequence_gradient<T: Scalar>(
    d_seq: &mut Vec<Option<Vector<T>>>,
    d_vec: &mut Option<Vector<T>>,
    steps: usize,
) {
    if let Some(d) = d_vec.take() {
        *d_seq = vec![None; steps];
        d_seq[steps - 1] = Some(d);
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict_class<T: Scalar>(scores: &Vector<T>) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Inference-mode scores.
pub fn predict_scores<T: Scalar>(
    m: &Model<T>,
    s: &SequenceSample<T>,
) -> Result<Vector<T>, RecurrentError> {
    // rng is unused when training = false
    let mut rng = SeededRng::new(0);
    Ok(model_forward(m, s, false, &mut rng)?.0)
}
