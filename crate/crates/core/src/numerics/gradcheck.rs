//! Central finite-difference oracle for analytic gradients.

use crate::error::{Error, Result};

use super::params::{GradientTape, ParamStore};

/// `(f(x+ε) − f(x−ε)) / 2ε`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, epsilon: f64) -> f64 {
    (f(x + epsilon) - f(x - epsilon)) / (2.0 * epsilon)
}

/// Relative error used by the gradient checks.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences on every scalar parameter and returns the worst relative error.
///
/// `loss_fn` is evaluated twice at the unperturbed point first; any difference
/// means it is not deterministic and the comparison would be meaningless.
pub fn finite_diff_check<F>(mut loss_fn: F, params: &ParamStore, epsilon: f64) -> Result<f64>
where
    F: FnMut(&ParamStore) -> Result<(f64, GradientTape)>,
{
    if epsilon <= 0.0 {
        return Err(Error::Range(format!("epsilon {epsilon} must be positive")));
    }
    let (first, analytic) = loss_fn(params)?;
    let (second, _) = loss_fn(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    if !analytic.matches(params) {
        return Err(Error::dim(
            "finite_diff_check gradient blocks",
            format!("{:?}", params.shapes()),
            format!("{} blocks", analytic.len()),
        ));
    }

    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.scalar_count() {
        let x = params.flat_get(i);
        probe.flat_set(i, x + epsilon);
        let (plus, _) = loss_fn(&probe)?;
        probe.flat_set(i, x - epsilon);
        let (minus, _) = loss_fn(&probe)?;
        probe.flat_set(i, x);
        let numeric = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic.flat_get(i), numeric));
    }
    Ok(worst)
}
