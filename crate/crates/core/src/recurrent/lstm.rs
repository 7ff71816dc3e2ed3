use serde::{Deserialize, Serialize};

use super::gru::check_shape;
use super::RecurrentError;
use crate::numerics::{init_matrix, sigmoid_scalar, Matrix, Scalar, SeededRng, Vector};

/// Learnable tensors of one LSTM cell with `d` inputs and `h` hidden units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LstmParams<T> {
    pub w_f: Matrix<T>,
    pub w_i: Matrix<T>,
    pub w_g: Matrix<T>,
    pub w_o: Matrix<T>,
    pub u_f: Matrix<T>,
    pub u_i: Matrix<T>,
    pub u_g: Matrix<T>,
    pub u_o: Matrix<T>,
    pub b_f: Vector<T>,
    pub b_i: Vector<T>,
    pub b_g: Vector<T>,
    pub b_o: Vector<T>,
}

#[derive(Debug, Clone)]
pub struct LstmStepTrace<T> {
    pub x: Vector<T>,
    pub h_prev: Vector<T>,
    pub c_prev: Vector<T>,
    pub f: Vector<T>,
    pub i: Vector<T>,
    pub g: Vector<T>,
    pub o: Vector<T>,
    pub c: Vector<T>,
    pub tanh_c: Vector<T>,
    pub h: Vector<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let u = || Matrix::zeros(hidden, hidden);
        let b = || Vector::zeros(hidden);
        Self {
            w_f: w(),
            w_i: w(),
            w_g: w(),
            w_o: w(),
            u_f: u(),
            u_i: u(),
            u_g: u(),
            u_o: u(),
            b_f: b(),
            b_i: b(),
            b_g: b(),
            b_o: b(),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self, RecurrentError> {
        Ok(Self {
            w_f: init_matrix(hidden, input, rng)?,
            w_i: init_matrix(hidden, input, rng)?,
            w_g: init_matrix(hidden, input, rng)?,
            w_o: init_matrix(hidden, input, rng)?,
            u_f: init_matrix(hidden, hidden, rng)?,
            u_i: init_matrix(hidden, hidden, rng)?,
            u_g: init_matrix(hidden, hidden, rng)?,
            u_o: init_matrix(hidden, hidden, rng)?,
            b_f: Vector::zeros(hidden),
            b_i: Vector::zeros(hidden),
            b_g: Vector::zeros(hidden),
            b_o: Vector::zeros(hidden),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_f.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 12] {
        [
            ("w_f", self.w_f.as_slice()),
            ("w_i", self.w_i.as_slice()),
            ("w_g", self.w_g.as_slice()),
            ("w_o", self.w_o.as_slice()),
            ("u_f", self.u_f.as_slice()),
            ("u_i", self.u_i.as_slice()),
            ("u_g", self.u_g.as_slice()),
            ("u_o", self.u_o.as_slice()),
            ("b_f", self.b_f.as_slice()),
            ("b_i", self.b_i.as_slice()),
            ("b_g", self.b_g.as_slice()),
            ("b_o", self.b_o.as_slice()),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 12] {
        [
            ("w_f", self.w_f.as_mut_slice()),
            ("w_i", self.w_i.as_mut_slice()),
            ("w_g", self.w_g.as_mut_slice()),
            ("w_o", self.w_o.as_mut_slice()),
            ("u_f", self.u_f.as_mut_slice()),
            ("u_i", self.u_i.as_mut_slice()),
            ("u_g", self.u_g.as_mut_slice()),
            ("u_o", self.u_o.as_mut_slice()),
            ("b_f", self.b_f.as_mut_slice()),
            ("b_i", self.b_i.as_mut_slice()),
            ("b_g", self.b_g.as_mut_slice()),
            ("b_o", self.b_o.as_mut_slice()),
        ]
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        let (h, d) = self.w_f.shape();
        for (name, m) in [("w_i", &self.w_i), ("w_g", &self.w_g), ("w_o", &self.w_o)] {
            check_shape(name, m.shape(), (h, d))?;
        }
        for (name, m) in [
            ("u_f", &self.u_f),
            ("u_i", &self.u_i),
            ("u_g", &self.u_g),
            ("u_o", &self.u_o),
        ] {
            check_shape(name, m.shape(), (h, h))?;
        }
        for (name, b) in [
            ("b_f", &self.b_f),
            ("b_i", &self.b_i),
            ("b_g", &self.b_g),
            ("b_o", &self.b_o),
        ] {
            check_shape(name, (b.len(), 1), (h, 1))?;
        }
        Ok(())
    }
}

fn preactivation<T: Scalar>(
    w: &Matrix<T>,
    u: &Matrix<T>,
    b: &Vector<T>,
    x: &Vector<T>,
    h: &Vector<T>,
) -> Result<Vector<T>, RecurrentError> {
    let mut a = w.matvec(x)?;
    a.add_assign(&u.matvec(h)?)?;
    a.add_assign(b)?;
    Ok(a)
}

/// One LSTM step:
///
/// ```text
/// f = σ(W_f x + U_f h_prev + b_f)      forget gate
/// i = σ(W_i x + U_i h_prev + b_i)      input gate
/// g = tanh(W_g x + U_g h_prev + b_g)
/// o = σ(W_o x + U_o h_prev + b_o)      output gate
/// c = f ⊙ c_prev + i ⊙ g
/// h = o ⊙ tanh(c)
/// ```
pub fn lstm_step<T: Scalar>(
    p: &LstmParams<T>,
    x: &Vector<T>,
    h_prev: &Vector<T>,
    c_prev: &Vector<T>,
) -> Result<(Vector<T>, Vector<T>, LstmStepTrace<T>), RecurrentError> {
    if c_prev.len() != p.hidden_dim() {
        return Err(RecurrentError::Input {
            what: "cell state",
            expected: p.hidden_dim(),
            found: c_prev.len(),
        });
    }
    let f = preactivation(&p.w_f, &p.u_f, &p.b_f, x, h_prev)?.map(sigmoid_scalar);
    let i = preactivation(&p.w_i, &p.u_i, &p.b_i, x, h_prev)?.map(sigmoid_scalar);
    let g = preactivation(&p.w_g, &p.u_g, &p.b_g, x, h_prev)?.map(T::tanh);
    let o = preactivation(&p.w_o, &p.u_o, &p.b_o, x, h_prev)?.map(sigmoid_scalar);
    let n = f.len();
    let c: Vector<T> = (0..n)
        .map(|k| f[k] * c_prev[k] + i[k] * g[k])
        .collect::<Vec<_>>()
        .into();
    let tanh_c = c.map(T::tanh);
    let h: Vector<T> = o.hadamard(&tanh_c)?;
    let trace = LstmStepTrace {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        f,
        i,
        g,
        o,
        c: c.clone(),
        tanh_c,
        h: h.clone(),
    };
    Ok((h, c, trace))
}

/// Reverse-mode step. Given `dL/dh` and `dL/dc` flowing into this step,
/// accumulates parameter gradients and returns `(dL/dx, dL/dh_prev, dL/dc_prev)`.
pub fn lstm_step_backward<T: Scalar>(
    p: &LstmParams<T>,
    t: &LstmStepTrace<T>,
    dh: &Vector<T>,
    dc: &Vector<T>,
    grads: &mut LstmParams<T>,
) -> Result<(Vector<T>, Vector<T>, Vector<T>), RecurrentError> {
    let n = dh.len();
    let one = T::one();
    let mut da_f = Vec::with_capacity(n);
    let mut da_i = Vec::with_capacity(n);
    let mut da_g = Vec::with_capacity(n);
    let mut da_o = Vec::with_capacity(n);
    let mut dc_prev = Vec::with_capacity(n);
    for k in 0..n {
        let dct = dc[k] + dh[k] * t.o[k] * (one - t.tanh_c[k] * t.tanh_c[k]);
        da_o.push(dh[k] * t.tanh_c[k] * t.o[k] * (one - t.o[k]));
        da_f.push(dct * t.c_prev[k] * t.f[k] * (one - t.f[k]));
        da_i.push(dct * t.g[k] * t.i[k] * (one - t.i[k]));
        da_g.push(dct * t.i[k] * (one - t.g[k] * t.g[k]));
        dc_prev.push(dct * t.f[k]);
    }

    let mut dx = Vector::zeros(p.input_dim());
    let mut dh_prev = Vector::zeros(n);
    for (da, w, u, gw, gu, gb) in [
        (da_f, &p.w_f, &p.u_f, &mut grads.w_f, &mut grads.u_f, &mut grads.b_f),
        (da_i, &p.w_i, &p.u_i, &mut grads.w_i, &mut grads.u_i, &mut grads.b_i),
        (da_g, &p.w_g, &p.u_g, &mut grads.w_g, &mut grads.u_g, &mut grads.b_g),
        (da_o, &p.w_o, &p.u_o, &mut grads.w_o, &mut grads.u_o, &mut grads.b_o),
    ] {
        let da = Vector::from(da);
        gw.add_outer(&da, &t.x)?;
        gu.add_outer(&da, &t.h_prev)?;
        gb.add_assign(&da)?;
        dx.add_assign(&w.matvec_transposed(&da)?)?;
        dh_prev.add_assign(&u.matvec_transposed(&da)?)?;
    }
    Ok((dx, dh_prev, dc_prev.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = LstmParams::<f64>::zeros(3, 2);
        let (h, c, _) =
            lstm_step(&p, &Vector::from(vec![1.0, 2.0, 3.0]), &Vector::zeros(2), &Vector::zeros(2))
                .unwrap();
        assert_eq!(h, Vector::zeros(2));
        assert_eq!(c, Vector::zeros(2));
    }

    #[test]
    fn saturated_gates_keep_memory() {
        let mut rng = SeededRng::new(8);
        let mut p = LstmParams::<f64>::init(3, 4, &mut rng).unwrap();
        p.b_f = Vector::filled(4, 100.0);
        p.b_i = Vector::filled(4, -100.0);
        let c_prev = Vector::from(vec![0.5, -1.5, 2.0, 0.0]);
        let (_, c, _) = lstm_step(
            &p,
            &Vector::from(vec![0.3, -0.7, 0.1]),
            &Vector::from(vec![0.1, 0.2, -0.3, 0.4]),
            &c_prev,
        )
        .unwrap();
        for k in 0..4 {
            assert!((c[k] - c_prev[k]).abs() < 1e-40);
        }
    }

    #[test]
    fn scalar_reference_values() {
        let mut p = LstmParams::<f64>::zeros(1, 1);
        for (name, t) in p.tensors_mut() {
            if !name.starts_with('b') {
                t[0] = 1.0;
            }
        }
        let (h, c, tr) =
            lstm_step(&p, &Vector::from(vec![1.0]), &Vector::zeros(1), &Vector::zeros(1)).unwrap();
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        let g = 1.0f64.tanh();
        assert!((tr.f[0] - s).abs() < 1e-15);
        assert!((tr.i[0] - s).abs() < 1e-15);
        assert!((tr.o[0] - s).abs() < 1e-15);
        assert!((tr.g[0] - g).abs() < 1e-15);
        assert!((c[0] - s * g).abs() < 1e-15);
        assert!((h[0] - s * (s * g).tanh()).abs() < 1e-15);
        assert!((c[0] - 0.55677).abs() < 1e-5);
        assert!((h[0] - 0.369_606).abs() < 1e-6);
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::<f64>::zeros(2, 3);
        assert!(lstm_step(&p, &Vector::zeros(2), &Vector::zeros(3), &Vector::zeros(2)).is_err());
        assert!(lstm_step(&p, &Vector::zeros(1), &Vector::zeros(3), &Vector::zeros(3)).is_err());
    }
}
