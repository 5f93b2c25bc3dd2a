//! Central finite-difference gradient checking.

use crate::backward::backward;
use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Value};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    /// Largest `|analytic − numeric| / max(1, |analytic|)` over components.
    pub max_rel_error: f64,
    pub analytic: Tensor,
    pub numeric: Tensor,
}

fn evaluate<F>(f: &F, point: &Tensor) -> Result<f64>
where
    F: Fn(&Value) -> Result<Value>,
{
    let graph = Graph::new();
    let x = graph.constant(point.clone());
    let y = f(&x)?;
    if !y.shape().is_scalar() {
        return Err(AutodiffError::NonScalarRoot(y.shape()));
    }
    let v = y.item();
    if !v.is_finite() {
        return Err(AutodiffError::NonFinite(format!("f({point:?}) = {v}")));
    }
    Ok(v)
}

/// Central differences of a scalar function, one component at a time.
pub fn numeric_gradient<F>(f: &F, point: &Tensor, step: f64) -> Result<Tensor>
where
    F: Fn(&Value) -> Result<Value>,
{
    let mut grad = Tensor::zeros(point.rows(), point.cols());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + step;
        let hi = evaluate(f, &probe)?;
        probe.data_mut()[i] = x0 - step;
        let lo = evaluate(f, &probe)?;
        probe.data_mut()[i] = x0;
        grad.data_mut()[i] = (hi - lo) / (2.0 * step);
    }
    Ok(grad)
}

/// Compares `backward` against central differences at `point`.
pub fn check_gradient<F>(f: F, point: &Tensor, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&Value) -> Result<Value>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(AutodiffError::InvalidInput {
            op: "check_gradient",
            reason: format!("step must be positive, got {step}"),
        });
    }
    // Forward value must be finite before anything else.
    evaluate(&f, point)?;

    let graph = Graph::new();
    let x = graph.param(point.clone());
    let y = f(&x)?;
    let analytic = backward(&y, &[&x], false)?.tensor(&x);
    let numeric = numeric_gradient(&f, point, step)?;
    let max_rel_error = relative_error(&analytic, &numeric);
    Ok(GradCheckReport {
        passed: max_rel_error <= tolerance,
        max_rel_error,
        analytic,
        numeric,
    })
}

/// Max over components of `|a − n| / max(1, |a|)`.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}
