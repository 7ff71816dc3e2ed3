use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numerics::Scalar;
use crate::recurrent::{Gradients, Model};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer `{other}` (expected sgd or adam)")),
        }
    }
}

/// Per-parameter optimizer memory. Moments mirror the model's tensors in
/// [`Model::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, m: &Model<T>) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => {
                let z: Vec<Vec<T>> = m.tensors().iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
                (z.clone(), z)
            }
        };
        Self {
            kind,
            first,
            second,
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.second
    }
}

/// Applies one update `p ← p − lr·g` (SGD) or the bias-corrected Adam step.
///
/// Gradients are checked for shape and finiteness before any parameter is
/// touched, so a failed step leaves the model unchanged.
pub fn optimizer_step<T: Scalar>(
    state: &mut OptimizerState<T>,
    m: &mut Model<T>,
    grads: &Gradients<T>,
    learning_rate: f64,
) -> Result<(), TrainError> {
    let g = grads.tensors();
    {
        let p = m.tensors();
        if p.len() != g.len() || p.iter().zip(&g).any(|((_, a), (_, b))| a.len() != b.len()) {
            return Err(TrainError::GradientShape);
        }
    }
    if let Some((name, _)) = g.iter().find(|(_, t)| t.iter().any(|v| !v.is_finite())) {
        return Err(TrainError::NonFiniteGradient(name.clone()));
    }
    let lr = T::lit(learning_rate);
    match state.kind {
        OptimizerKind::Sgd => {
            for ((_, p), (_, g)) in m.tensors_mut().into_iter().zip(&g) {
                for (x, &d) in p.iter_mut().zip(g.iter()) {
                    *x -= lr * d;
                }
            }
        }
        OptimizerKind::Adam => {
            state.step += 1;
            let b1 = T::lit(ADAM_BETA1);
            let b2 = T::lit(ADAM_BETA2);
            let eps = T::lit(ADAM_EPSILON);
            let t = state.step as i32;
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            let params = m.tensors_mut();
            for (((_, p), (_, g)), (m1, m2)) in params
                .into_iter()
                .zip(&g)
                .zip(state.first.iter_mut().zip(state.second.iter_mut()))
            {
                for (((x, &d), a), b) in p.iter_mut().zip(g.iter()).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                    *a = b1 * *a + (T::one() - b1) * d;
                    *b = b2 * *b + (T::one() - b2) * d * d;
                    let m_hat = *a / c1;
                    let v_hat = *b / c2;
                    *x -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::{Architecture, ModelConfig};

    fn tiny() -> Model<f64> {
        Model::new(ModelConfig::canonical(Architecture::Gru, 2).with_width(3), 4).unwrap()
    }

    fn filled(m: &Model<f64>, v: f64) -> Gradients<f64> {
        let mut g = m.zero_gradients();
        for (_, t) in g.tensors_mut() {
            t.fill(v);
        }
        g
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut m = tiny();
            let before = m.clone();
            let mut s = OptimizerState::new(kind, &m);
            let g = m.zero_gradients();
            optimizer_step(&mut s, &mut m, &g, 0.1).unwrap();
            assert_eq!(m, before);
        }
    }

    #[test]
    fn sgd_arithmetic() {
        let mut m = tiny();
        for (_, t) in m.tensors_mut() {
            t.fill(0.0);
        }
        let mut s = OptimizerState::new(OptimizerKind::Sgd, &m);
        let g = filled(&m, 1.0);
        optimizer_step(&mut s, &mut m, &g, 0.1).unwrap();
        assert!(m.tensors().iter().all(|(_, t)| t.iter().all(|&v| v == -0.1)));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3, 1.0, 250.0, -7.0] {
            let mut m = tiny();
            let before: Vec<f64> = m.tensors().iter().flat_map(|(_, t)| t.to_vec()).collect();
            let mut s = OptimizerState::new(OptimizerKind::Adam, &m);
            let grads = filled(&m, g);
            optimizer_step(&mut s, &mut m, &grads, 0.01).unwrap();
            let after: Vec<f64> = m.tensors().iter().flat_map(|(_, t)| t.to_vec()).collect();
            for (a, b) in before.iter().zip(&after) {
                let step = b - a;
                assert!((step.abs() - 0.01).abs() < 1e-6, "g={g} step={step}");
                assert_eq!(step.signum(), -g.signum());
            }
            assert_eq!(s.steps(), 1);
        }
    }

    #[test]
    fn moments_mirror_parameters() {
        let m = tiny();
        let s = OptimizerState::new(OptimizerKind::Adam, &m);
        let shapes: Vec<usize> = m.tensors().iter().map(|(_, t)| t.len()).collect();
        assert_eq!(s.first_moments().iter().map(Vec::len).collect::<Vec<_>>(), shapes);
        assert_eq!(s.second_moments().iter().map(Vec::len).collect::<Vec<_>>(), shapes);
    }

    #[test]
    fn nan_gradient_fails_without_touching_parameters() {
        let mut m = tiny();
        let before = m.clone();
        let mut g = m.zero_gradients();
        g.tensors_mut()[3].1[0] = f64::NAN;
        let mut s = OptimizerState::new(OptimizerKind::Adam, &m);
        let err = optimizer_step(&mut s, &mut m, &g, 0.1).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient(ref n) if n == "layer0.gru.u_z"), "{err}");
        assert_eq!(m, before);
        assert_eq!(s.steps(), 0);
    }
}
