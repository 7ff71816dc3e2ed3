use serde::{Deserialize, Serialize};

use super::gru::check_shape;
use super::RecurrentError;
use crate::numerics::{init_matrix, Activation, Matrix, Scalar, SeededRng, Vector};

/// Fully connected layer `act(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseParams<T> {
    pub w: Matrix<T>,
    pub b: Vector<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseParams<T> {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            w: Matrix::zeros(output, input),
            b: Vector::zeros(output),
            activation,
        }
    }

    pub fn init(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self, RecurrentError> {
        Ok(Self {
            w: init_matrix(output, input, rng)?,
            b: Vector::zeros(output),
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim(), self.activation)
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 2] {
        [("w", self.w.as_slice()), ("b", self.b.as_slice())]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 2] {
        [("w", self.w.as_mut_slice()), ("b", self.b.as_mut_slice())]
    }

    pub fn validate(&self) -> Result<(), RecurrentError> {
        check_shape("b", (self.b.len(), 1), (self.w.rows(), 1))
    }
}

pub fn dense_forward<T: Scalar>(
    p: &DenseParams<T>,
    input: &Vector<T>,
) -> Result<Vector<T>, RecurrentError> {
    let mut a = p.w.matvec(input)?;
    a.add_assign(&p.b)?;
    Ok(p.activation.apply(&a))
}

/// Accumulates `dW`, `db` and returns `dL/dinput`.
pub fn dense_backward<T: Scalar>(
    p: &DenseParams<T>,
    input: &Vector<T>,
    output: &Vector<T>,
    d_output: &Vector<T>,
    grads: &mut DenseParams<T>,
) -> Result<Vector<T>, RecurrentError> {
    let da: Vector<T> = d_output
        .iter()
        .zip(output.iter())
        .map(|(&d, &y)| d * p.activation.derivative_from_output(y))
        .collect::<Vec<_>>()
        .into();
    grads.w.add_outer(&da, input)?;
    grads.b.add_assign(&da)?;
    Ok(p.w.matvec_transposed(&da)?)
}
