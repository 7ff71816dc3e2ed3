use serde::{Deserialize, Serialize};

use super::BaselineError;

/// A kernel expansion fitted elsewhere: support vectors, their signed
/// coefficients, a bias, and the RBF bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub sigma: f64,
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.sigma > 0.0) {
            return Err(BaselineError::Param(format!("kernel bandwidth must be positive, got {}", self.sigma)));
        }
        if self.support_vectors.is_empty() {
            return Err(BaselineError::Param("at least one support vector is required".into()));
        }
        if self.support_vectors.len() != self.coefficients.len() {
            return Err(BaselineError::Dimension {
                expected: self.support_vectors.len(),
                found: self.coefficients.len(),
            });
        }
        Ok(())
    }
}

/// exp(−‖x−y‖² / 2σ²)
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64, BaselineError> {
    if !(sigma > 0.0) {
        return Err(BaselineError::Param(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    if x.len() != y.len() {
        return Err(BaselineError::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / (2.0 * sigma * sigma)).exp())
}

/// Σ Qᵢ K(xᵢ, x) + b
pub fn svm_decision_value(p: &SvmParams, x: &[f64]) -> Result<f64, BaselineError> {
    p.validate()?;
    let mut s = p.bias;
    for (sv, q) in p.support_vectors.iter().zip(&p.coefficients) {
        s += q * rbf_kernel(sv, x, p.sigma)?;
    }
    Ok(s)
}

/// Sign of the decision value, with sign(0) = +1.
pub fn svm_decision(p: &SvmParams, x: &[f64]) -> Result<i8, BaselineError> {
    Ok(if svm_decision_value(p, x)? >= 0.0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_cases() {
        assert_eq!(rbf_kernel(&[1.0, -2.0], &[1.0, -2.0], 0.3).unwrap(), 1.0);
        // ‖x−y‖² = 2σ² with σ = 1.5
        let k = rbf_kernel(&[0.0, 0.0], &[1.5, 1.5], 1.5).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn kernel_errors() {
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], -1.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], f64::NAN).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn decision_signs() {
        let p = SvmParams {
            support_vectors: vec![vec![0.0], vec![2.0]],
            coefficients: vec![1.0, -1.0],
            bias: 0.0,
            sigma: 0.5,
        };
        assert_eq!(svm_decision(&p, &[0.1]).unwrap(), 1);
        assert_eq!(svm_decision(&p, &[1.9]).unwrap(), -1);
        // equidistant: the expansion is exactly zero
        assert_eq!(svm_decision_value(&p, &[1.0]).unwrap(), 0.0);
        assert_eq!(svm_decision(&p, &[1.0]).unwrap(), 1);
        let empty = SvmParams { support_vectors: vec![], coefficients: vec![], ..p };
        assert!(svm_decision(&empty, &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_in_unit_interval(
            x in proptest::collection::vec(-5f64..5.0, 3),
            y in proptest::collection::vec(-5f64..5.0, 3),
            sigma in 0.05f64..10.0,
        ) {
            let a = rbf_kernel(&x, &y, sigma).unwrap();
            prop_assert_eq!(a, rbf_kernel(&y, &x, sigma).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
