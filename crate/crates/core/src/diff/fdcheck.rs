//! Central finite-difference gradient oracle.
//!
//! Deliberately knows nothing about the tape's backward rules: it re-runs a
//! caller-supplied forward closure at perturbed parameter values. Loss
//! closures must be deterministic under perturbation (fix RNG seeds inside).

use rand::Rng as _;

use super::ndarray::Real;
use super::params::{ParamId, ParamSet};
use crate::util::Rng;

/// Central difference of `loss` w.r.t. one parameter component.
pub fn fd_param(
    params: &mut ParamSet,
    id: ParamId,
    idx: usize,
    eps: Real,
    loss: &mut dyn FnMut(&ParamSet) -> Real,
) -> Real {
    let orig = params.value(id)[idx];
    params.get_mut(id).value[idx] = orig + eps;
    let hi = loss(params);
    params.get_mut(id).value[idx] = orig - eps;
    let lo = loss(params);
    params.get_mut(id).value[idx] = orig;
    (hi - lo) / (2.0 * eps)
}

/// Relative error with an absolute floor: true relative disagreement for
/// gradients of meaningful magnitude, absolute comparison below the floor
/// where finite differences are dominated by rounding.
pub fn rel_err(analytic: Real, fd: Real) -> Real {
    let denom = analytic.abs().max(fd.abs()).max(1e-3);
    (analytic - fd).abs() / denom
}

pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: Real,
    pub worst: Option<(String, usize, Real, Real)>,
}

impl GradCheckReport {
    pub fn assert_within(&self, tol: Real) {
        assert!(
            self.max_rel_err <= tol,
            "gradient check failed: max rel err {} > {tol} at {:?} ({} components)",
            self.max_rel_err,
            self.worst,
            self.checked
        );
    }
}

/// Compare analytic gradients already accumulated in `params` against
/// central differences of `loss`, sampling up to `per_param` components of
/// each parameter.
pub fn check_against_fd(
    params: &mut ParamSet,
    eps: Real,
    per_param: usize,
    rng: &mut Rng,
    loss: &mut dyn FnMut(&ParamSet) -> Real,
) -> GradCheckReport {
    let mut report = GradCheckReport { checked: 0, max_rel_err: 0.0, worst: None };
    let ids: Vec<(ParamId, usize, String)> = params
        .iter()
        .map(|(id, p)| (id, p.value.numel(), p.name.clone()))
        .collect();
    for (id, numel, name) in ids {
        let mut picks: Vec<usize> = if numel <= per_param {
            (0..numel).collect()
        } else {
            (0..per_param).map(|_| rng.random_range(0..numel)).collect()
        };
        picks.sort_unstable();
        picks.dedup();
        for idx in picks {
            let analytic = params.get(id).grad[idx];
            let fd = fd_param(params, id, idx, eps, loss);
            let err = rel_err(analytic, fd);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((name.clone(), idx, analytic, fd));
            }
        }
    }
    report
}
