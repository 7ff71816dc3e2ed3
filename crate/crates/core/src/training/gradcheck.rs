use serde::{Deserialize, Serialize};

use super::{LossKind, TrainError};
use crate::dataio::SequenceSample;
use crate::numerics::{derive_seed, Activation, DoubleDouble, Scalar, SeededRng, Vector};
use crate::recurrent::{model_backward, model_forward, ForwardTrace, Gradients, Model, RecurrentError};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Largest `|a - n| / max(|a|, |n|, 1e-8)` over all coordinates.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Tensor holding the worst coordinate, e.g. `layer1.lstm.u_f`.
    pub worst_parameter: String,
    pub worst_index: usize,
    pub parameters_checked: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn loss_for<T: Scalar>(m: &Model<T>) -> LossKind {
    if m.config().output_activation == Activation::Linear {
        LossKind::Softmax
    } else {
        LossKind::Bce
    }
}

/// Checks [`model_backward`] against `(L(θ+eps) − L(θ−eps)) / 2eps` for
/// every parameter coordinate.
///
/// The loss is the one matching the model head (sigmoid → BCE, linear →
/// softmax). The numerical side is evaluated in [`DoubleDouble`] precision
/// on an exact copy of the parameters. Dropout stays active with a mask that is identical for every
/// evaluation, so the checked function is deterministic.
pub fn gradient_check<T: Scalar>(
    m: &Model<T>,
    sample: &SequenceSample<T>,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport, TrainError> {
    check::<T, DoubleDouble, _>(m, sample, eps, tol, model_backward)
}

/// [`gradient_check`] with a caller-supplied backward pass.
pub fn gradient_check_with<T, F>(
    m: &Model<T>,
    sample: &SequenceSample<T>,
    eps: f64,
    tol: f64,
    backward: F,
) -> Result<GradCheckReport, TrainError>
where
    T: Scalar,
    F: Fn(&Model<T>, &ForwardTrace<T>, &Vector<T>) -> Result<Gradients<T>, RecurrentError>,
{
    check::<T, DoubleDouble, _>(m, sample, eps, tol, backward)
}

/// [`gradient_check`] with the finite differences evaluated in scalar type `U`.
///
/// With `U = f64` the error shows the classic trade-off between truncation
/// (large `eps`) and round-off (small `eps`).
pub fn gradient_check_in<U: Scalar, T: Scalar>(
    m: &Model<T>,
    sample: &SequenceSample<T>,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport, TrainError> {
    check::<T, U, _>(m, sample, eps, tol, model_backward)
}

fn check<T, U, F>(
    m: &Model<T>,
    sample: &SequenceSample<T>,
    eps: f64,
    tol: f64,
    backward: F,
) -> Result<GradCheckReport, TrainError>
where
    T: Scalar,
    U: Scalar,
    F: Fn(&Model<T>, &ForwardTrace<T>, &Vector<T>) -> Result<Gradients<T>, RecurrentError>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(TrainError::Config(format!("finite-difference step {eps} must be positive")));
    }
    let kind = loss_for(m);
    let mask_seed = derive_seed(m.seed(), "gradcheck.mask");

    let mut rng = SeededRng::new(mask_seed);
    let (scores, trace) = model_forward(m, sample, true, &mut rng)?;
    let (_, upstream) = kind.evaluate(&scores, sample.target);
    let analytic = backward(m, &trace, &upstream)?;
    let analytic: Vec<(String, Vec<T>)> = analytic.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();

    // With U wider than f64, round-off (about |L|·1e-16/eps in f64) cannot
    // masquerade as gradient error.
    let wide_sample: SequenceSample<U> = sample.cast();
    let loss_at = |model: &Model<U>| -> Result<U, TrainError> {
        let mut rng = SeededRng::new(mask_seed);
        let (scores, _) = model_forward(model, &wide_sample, true, &mut rng)?;
        Ok(kind.evaluate(&scores, sample.target).0)
    };
    let mut work: Model<U> = m.cast();
    let step = U::lit(eps);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        parameters_checked: 0,
        eps,
        tolerance: tol,
        passed: true,
    };
    for (k, (name, grad)) in analytic.iter().enumerate() {
        for (j, &a) in grad.iter().enumerate() {
            let orig = work.tensors()[k].1[j];
            let (up, down) = (orig + step, orig - step);
            work.tensors_mut()[k].1[j] = up;
            let lp = loss_at(&work)?;
            work.tensors_mut()[k].1[j] = down;
            let lm = loss_at(&work)?;
            work.tensors_mut()[k].1[j] = orig;
            // divide by the step actually taken after rounding
            let n = ((lp - lm) / (up - down)).as_f64();
            let a = a.as_f64();
            let abs = (a - n).abs();
            let rel = abs / a.abs().max(n.abs()).max(1e-8);
            if !(rel <= report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_parameter = name.clone();
                report.worst_index = j;
            }
            report.max_abs_error = report.max_abs_error.max(abs);
            report.parameters_checked += 1;
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}
