//! Central finite-difference gradient checker.
//!
//! Every differentiable operation in the crate is validated against this
//! checker: analytic gradients are accumulated into a [`ParamStore`] first,
//! then compared entry-wise against (f(p+eps) - f(p-eps)) / (2 eps).

use crate::error::{Error, Result};
use crate::nn::ParamStore;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error per parameter tensor, in store (name) order.
    pub per_param: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite errors"))
    }
}

/// Relative error with denominator max(|analytic|, |numeric|, 1e-8).
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradients already stored in `store` against central
/// differences of `loss`. The loss must be a pure function of the store
/// values; any randomness has to be frozen by the caller beforehand.
pub fn finite_diff_check(
    store: &mut ParamStore,
    epsilon: f64,
    tolerance: f64,
    mut loss: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<GradCheckReport> {
    let names: Vec<String> = store.names().cloned().collect();
    let mut per_param = Vec::with_capacity(names.len());
    let mut max_rel = 0.0_f64;
    for name in &names {
        let len = store.value(name).len();
        let mut param_max = 0.0_f64;
        for idx in 0..len {
            let original = store.value(name).as_slice()[idx];
            store.value_mut(name).as_mut_slice()[idx] = original + epsilon;
            let f_plus = loss(store)?;
            store.value_mut(name).as_mut_slice()[idx] = original - epsilon;
            let f_minus = loss(store)?;
            store.value_mut(name).as_mut_slice()[idx] = original;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradcheck: loss at perturbed {name}[{idx}]"
                )));
            }
            let numeric = (f_plus - f_minus) / (2.0 * epsilon);
            let analytic = store.grad(name).as_slice()[idx];
            param_max = param_max.max(relative_error(analytic, numeric));
        }
        max_rel = max_rel.max(param_max);
        per_param.push((name.clone(), param_max));
    }
    Ok(GradCheckReport {
        per_param,
        max_rel_error: max_rel,
        tolerance,
        pass: max_rel <= tolerance,
    })
}
