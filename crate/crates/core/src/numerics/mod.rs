//! Dense linear algebra, activations and seeded initialization.
//!
//! Everything here is generic over [`Scalar`]; the crate root exposes `f64`
//! aliases.

mod activation;
mod dd;
mod matrix;
mod rng;
mod scalar;

use thiserror::Error;

pub use activation::{
    sigmoid, sigmoid_derivative, sigmoid_scalar, tanh_act, tanh_derivative, Activation,
};
pub use dd::DoubleDouble;
pub use matrix::{hadamard, matvec, Matrix, Vector};
pub use rng::{derive_seed, fnv1a, splitmix64, SeededRng};
pub use scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: shape mismatch {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: length mismatch {left} vs {right}")]
    Length {
        op: &'static str,
        left: usize,
        right: usize,
    },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in matrix data")]
    NonFinite,
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    ZeroDimension { rows: usize, cols: usize },
}

/// Glorot-uniform matrix: entries drawn from `U(-a, a)` with `a = sqrt(6 / (rows + cols))`.
pub fn init_matrix<T: Scalar>(
    rows: usize,
    cols: usize,
    rng: &mut SeededRng,
) -> Result<Matrix<T>, NumericsError> {
    if rows == 0 || cols == 0 {
        return Err(NumericsError::ZeroDimension { rows, cols });
    }
    let limit = glorot_limit(rows, cols);
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.uniform(-limit, limit)))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn glorot_limit(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a: Matrix<f64> = init_matrix(20, 30, &mut SeededRng::new(4)).unwrap();
        let b: Matrix<f64> = init_matrix(20, 30, &mut SeededRng::new(4)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let lim = glorot_limit(20, 30);
        assert!(a.as_slice().iter().all(|v| v.abs() <= lim));
    }

    #[test]
    fn init_large_sample_mean_near_zero() {
        let m: Matrix<f64> = init_matrix(1000, 1000, &mut SeededRng::new(2024)).unwrap();
        // U(-a, a) with a = sqrt(6/2000): std of mean = a / sqrt(3e6) ~ 3e-5
        let mean = m.as_slice().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn init_rejects_zero_dimension() {
        assert!(matches!(
            init_matrix::<f64>(0, 3, &mut SeededRng::new(1)),
            Err(NumericsError::ZeroDimension { .. })
        ));
    }
}
