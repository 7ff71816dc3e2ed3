use serde::{Deserialize, Serialize};

use super::{Scalar, Vector};

/// Numerically stable logistic function; never produces NaN for finite input.
#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    v.map(sigmoid_scalar)
}

/// Derivative of the logistic function expressed through its output `s = σ(x)`.
pub fn sigmoid_derivative<T: Scalar>(s: &Vector<T>) -> Vector<T> {
    s.map(|s| s * (T::one() - s))
}

pub fn tanh_act<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    v.map(T::tanh)
}

/// Derivative of tanh expressed through its output `t = tanh(x)`.
pub fn tanh_derivative<T: Scalar>(t: &Vector<T>) -> Vector<T> {
    t.map(|t| T::one() - t * t)
}

/// Pointwise nonlinearity selectable per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply_scalar<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => sigmoid_scalar(x),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    pub fn apply<T: Scalar>(self, v: &Vector<T>) -> Vector<T> {
        v.map(|x| self.apply_scalar(x))
    }

    /// Derivative given the activation's *output*.
    #[inline]
    pub fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Tanh => T::one() - y * y,
            Activation::Linear => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn v(x: f64) -> Vector<f64> {
        Vector::from(vec![x])
    }

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(&v(0.0))[0], 0.5);
        assert!((sigmoid(&v(3f64.ln()))[0] - 0.75).abs() < 1e-15);
        for x in [-40.0, -3.2, -0.1, 0.7, 5.0, 38.0] {
            let s = sigmoid(&v(x))[0] + sigmoid(&v(-x))[0];
            assert!((s - 1.0).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn sigmoid_saturates_without_nan() {
        for x in [-1e308f64, -800.0, 800.0, 1e308] {
            let s = sigmoid_scalar(x);
            assert!(!s.is_nan());
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn tanh_reference_points() {
        assert_eq!(tanh_act(&v(0.0))[0], 0.0);
        assert!((tanh_act(&v(3f64.ln()))[0] - 0.8).abs() < 1e-15);
        for x in [0.3, 1.7, 9.0] {
            assert_eq!(tanh_act(&v(-x))[0], -tanh_act(&v(x))[0]);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = SeededRng::new(11);
        let h = 1e-6;
        for _ in 0..100 {
            let x = rng.uniform(-6.0, 6.0);
            let num_s = (sigmoid_scalar(x + h) - sigmoid_scalar(x - h)) / (2.0 * h);
            let ana_s = sigmoid_derivative(&sigmoid(&v(x)))[0];
            assert!((num_s - ana_s).abs() < 1e-7, "sigmoid' at {x}");

            let num_t = ((x + h).tanh() - (x - h).tanh()) / (2.0 * h);
            let ana_t = tanh_derivative(&tanh_act(&v(x)))[0];
            assert!((num_t - ana_t).abs() < 1e-7, "tanh' at {x}");
        }
    }

    #[test]
    fn ranges_hold_for_moderate_inputs() {
        // beyond |x| ~ 18.4 tanh rounds to exactly ±1 in f64
        let mut rng = SeededRng::new(5);
        for _ in 0..1000 {
            let x = rng.uniform(-18.0, 18.0);
            let s = sigmoid_scalar(x);
            let t = x.tanh();
            assert!(s > 0.0 && s < 1.0);
            assert!(t > -1.0 && t < 1.0);
        }
    }
}
