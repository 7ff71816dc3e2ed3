use serde::{Deserialize, Serialize};

use super::RecurrentError;
use crate::numerics::{init_matrix, Activation, Matrix, Scalar, SeededRng, Vector};

/// Learnable tensors of one GRU cell with `d` inputs and `h` hidden units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GruParams<T> {
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_z: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_z: Vector<T>,
    pub b_r: Vector<T>,
    pub b_h: Vector<T>,
    /// Nonlinearity of the candidate state.
    pub candidate_activation: Activation,
}

/// Intermediate values of one GRU step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStepTrace<T> {
    pub x: Vector<T>,
    pub h_prev: Vector<T>,
    /// Update gate.
    pub z: Vector<T>,
    /// Reset gate.
    pub r: Vector<T>,
    /// `r ⊙ h_prev`
    pub reset_hidden: Vector<T>,
    pub candidate: Vector<T>,
    pub h: Vector<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let u = || Matrix::zeros(hidden, hidden);
        Self {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: Vector::zeros(hidden),
            b_r: Vector::zeros(hidden),
            b_h: Vector::zeros(hidden),
            candidate_activation: Activation::Tanh,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(
        input: usize,
        hidden: usize,
        candidate_activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self, RecurrentError> {
        Ok(Self {
            w_z: init_matrix(hidden, input, rng)?,
            w_r: init_matrix(hidden, input, rng)?,
            w_h: init_matrix(hidden, input, rng)?,
            u_z: init_matrix(hidden, hidden, rng)?,
            u_r: init_matrix(hidden, hidden, rng)?,
            u_h: init_matrix(hidden, hidden, rng)?,
            b_z: Vector::zeros(hidden),
            b_r: Vector::zeros(hidden),
            b_h: Vector::zeros(hidden),
            candidate_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.input_dim(), self.hidden_dim());
        z.candidate_activation = self.candidate_activation;
        z
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 9] {
        [
            ("w_z", self.w_z.as_slice()),
            ("w_r", self.w_r.as_slice()),
            ("w_h", self.w_h.as_slice()),
            ("u_z", self.u_z.as_slice()),
            ("u_r", self.u_r.as_slice()),
            ("u_h", self.u_h.as_slice()),
            ("b_z", self.b_z.as_slice()),
            ("b_r", self.b_r.as_slice()),
            ("b_h", self.b_h.as_slice()),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 9] {
        [
            ("w_z", self.w_z.as_mut_slice()),
            ("w_r", self.w_r.as_mut_slice()),
            ("w_h", self.w_h.as_mut_slice()),
            ("u_z", self.u_z.as_mut_slice()),
            ("u_r", self.u_r.as_mut_slice()),
            ("u_h", self.u_h.as_mut_slice()),
            ("b_z", self.b_z.as_mut_slice()),
            ("b_r", self.b_r.as_mut_slice()),
            ("b_h", self.b_h.as_mut_slice()),
        ]
    }

    /// Checks that all tensors agree on `(input, hidden)`.
    pub fn validate(&self) -> Result<(), RecurrentError> {
        let (h, d) = self.w_z.shape();
        for (name, m) in [("w_r", &self.w_r), ("w_h", &self.w_h)] {
            check_shape(name, m.shape(), (h, d))?;
        }
        for (name, m) in [("u_z", &self.u_z), ("u_r", &self.u_r), ("u_h", &self.u_h)] {
            check_shape(name, m.shape(), (h, h))?;
        }
        for (name, b) in [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_h", &self.b_h)] {
            check_shape(name, (b.len(), 1), (h, 1))?;
        }
        Ok(())
    }
}

pub(crate) fn check_shape(
    name: &str,
    found: (usize, usize),
    expected: (usize, usize),
) -> Result<(), RecurrentError> {
    if found != expected {
        return Err(RecurrentError::ParamShape {
            name: name.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// One GRU step:
///
/// ```text
/// z  = σ(W_z x + U_z h_prev + b_z)
/// r  = σ(W_r x + U_r h_prev + b_r)
/// h~ = act(W_h x + U_h (r ⊙ h_prev) + b_h)
/// h  = (1 - z) ⊙ h_prev + z ⊙ h~
/// ```
pub fn gru_step<T: Scalar>(
    p: &GruParams<T>,
    x: &Vector<T>,
    h_prev: &Vector<T>,
) -> Result<(Vector<T>, GruStepTrace<T>), RecurrentError> {
    let gate = |w: &Matrix<T>, u: &Matrix<T>, h: &Vector<T>, b: &Vector<T>, act: Activation| {
        let mut a = w.matvec(x)?;
        a.add_assign(&u.matvec(h)?)?;
        a.add_assign(b)?;
        Ok::<_, RecurrentError>(act.apply(&a))
    };
    let z = gate(&p.w_z, &p.u_z, h_prev, &p.b_z, Activation::Sigmoid)?;
    let r = gate(&p.w_r, &p.u_r, h_prev, &p.b_r, Activation::Sigmoid)?;
    let reset_hidden = r.hadamard(h_prev)?;
    let candidate = gate(&p.w_h, &p.u_h, &reset_hidden, &p.b_h, p.candidate_activation)?;
    let h: Vector<T> = (0..z.len())
        .map(|k| (T::one() - z[k]) * h_prev[k] + z[k] * candidate[k])
        .collect::<Vec<_>>()
        .into();
    let trace = GruStepTrace {
        x: x.clone(),
        h_prev: h_prev.clone(),
        z,
        r,
        reset_hidden,
        candidate,
        h: h.clone(),
    };
    Ok((h, trace))
}

/// Reverse-mode step: accumulates parameter gradients into `grads` and
/// returns `(dL/dx, dL/dh_prev)` given `dL/dh`.
pub fn gru_step_backward<T: Scalar>(
    p: &GruParams<T>,
    t: &GruStepTrace<T>,
    dh: &Vector<T>,
    grads: &mut GruParams<T>,
) -> Result<(Vector<T>, Vector<T>), RecurrentError> {
    let n = dh.len();
    let mut dh_prev: Vector<T> = (0..n).map(|k| dh[k] * (T::one() - t.z[k])).collect::<Vec<_>>().into();
    let da_c: Vector<T> = (0..n)
        .map(|k| dh[k] * t.z[k] * p.candidate_activation.derivative_from_output(t.candidate[k]))
        .collect::<Vec<_>>()
        .into();
    let da_z: Vector<T> = (0..n)
        .map(|k| dh[k] * (t.candidate[k] - t.h_prev[k]) * t.z[k] * (T::one() - t.z[k]))
        .collect::<Vec<_>>()
        .into();

    grads.w_h.add_outer(&da_c, &t.x)?;
    grads.u_h.add_outer(&da_c, &t.reset_hidden)?;
    grads.b_h.add_assign(&da_c)?;
    let mut dx = p.w_h.matvec_transposed(&da_c)?;
    let d_reset_hidden = p.u_h.matvec_transposed(&da_c)?;

    let da_r: Vector<T> = (0..n)
        .map(|k| d_reset_hidden[k] * t.h_prev[k] * t.r[k] * (T::one() - t.r[k]))
        .collect::<Vec<_>>()
        .into();
    for k in 0..n {
        dh_prev[k] += d_reset_hidden[k] * t.r[k];
    }

    for (da, w, u, gw, gu, gb) in [
        (&da_r, &p.w_r, &p.u_r, &mut grads.w_r, &mut grads.u_r, &mut grads.b_r),
        (&da_z, &p.w_z, &p.u_z, &mut grads.w_z, &mut grads.u_z, &mut grads.b_z),
    ] {
        gw.add_outer(da, &t.x)?;
        gu.add_outer(da, &t.h_prev)?;
        gb.add_assign(da)?;
        dx.add_assign(&w.matvec_transposed(da)?)?;
        dh_prev.add_assign(&u.matvec_transposed(da)?)?;
    }
    Ok((dx, dh_prev))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_cell(weight: f64) -> GruParams<f64> {
        let mut p = GruParams::zeros(1, 1);
        for (_, t) in p.tensors_mut() {
            if t.len() == 1 {
                t[0] = weight;
            }
        }
        for b in [&mut p.b_z, &mut p.b_r, &mut p.b_h] {
            b[0] = 0.0;
        }
        p
    }

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = GruParams::<f64>::zeros(3, 4);
        let (h, tr) = gru_step(&p, &Vector::from(vec![0.3, -2.0, 5.0]), &Vector::zeros(4)).unwrap();
        assert_eq!(h, Vector::zeros(4));
        assert!(tr.z.iter().all(|&z| z == 0.5));
        assert!(tr.candidate.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn closed_update_gate_copies_state() {
        let mut p = GruParams::<f64>::zeros(2, 3);
        p.b_z = Vector::filled(3, -100.0);
        let h_prev = Vector::from(vec![0.4, -0.2, 0.9]);
        let (h, _) = gru_step(&p, &Vector::from(vec![1.0, 2.0]), &h_prev).unwrap();
        for k in 0..3 {
            assert!((h[k] - h_prev[k]).abs() < 1e-40);
        }
    }

    #[test]
    fn scalar_reference_values() {
        // Independent arithmetic: a = 1 for every gate pre-activation.
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        let c = 1.0f64.tanh();
        let expect_h = s * c;
        let (h, tr) = gru_step(&scalar_cell(1.0), &Vector::from(vec![1.0]), &Vector::zeros(1)).unwrap();
        assert!((tr.z[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((tr.r[0] - s).abs() < 1e-15);
        assert!((tr.candidate[0] - 0.761_594_155_955_764_9).abs() < 1e-12);
        assert!((h[0] - expect_h).abs() < 1e-15);
        assert!((h[0] - 0.55677).abs() < 1e-5);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = GruParams::<f64>::zeros(2, 3);
        assert!(gru_step(&p, &Vector::zeros(3), &Vector::zeros(3)).is_err());
        assert!(gru_step(&p, &Vector::zeros(2), &Vector::zeros(2)).is_err());
    }

    #[test]
    fn output_is_convex_combination() {
        let mut rng = SeededRng::new(12);
        let p = GruParams::<f64>::init(4, 6, Activation::Tanh, &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vector<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<_>>().into();
            let hp: Vector<f64> = (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>().into();
            let (h, t) = gru_step(&p, &x, &hp).unwrap();
            for k in 0..6 {
                let lo = hp[k].min(t.candidate[k]);
                let hi = hp[k].max(t.candidate[k]);
                assert!(h[k] >= lo - 1e-15 && h[k] <= hi + 1e-15);
                assert!(t.z[k] > 0.0 && t.z[k] < 1.0 && t.r[k] > 0.0 && t.r[k] < 1.0);
                assert!(t.candidate[k].abs() < 1.0);
            }
        }
    }
}
