//! Density evolution on the binary erasure channel.
//!
//! One decoder iteration maps the erased-message probability `y` to
//! `eps * lambda(1 - rho(1 - y))`. Traces of that recursion make the
//! contraction rate of a design directly observable.

use serde::{Deserialize, Serialize};

use crate::certify;
use crate::error::{Error, Result};
use crate::poly::DegreeDistribution;

pub const DEFAULT_TARGET: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// A step that lowers the erasure probability by less than this while still
/// above target is treated as a stall at a fixed point.
pub const STALL_TOL: f64 = 1e-14;

/// Consecutive pairs with `y_l` below this are ignored when measuring
/// contraction.
const RATIO_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeTrace {
    pub epsilon: f64,
    /// `y_0 = epsilon, y_1, ..., y_L`
    pub values: Vec<f64>,
    pub converged: bool,
    pub iterations_to_target: Option<usize>,
}

impl DeTrace {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("a trace always holds y_0")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub bracket_width: f64,
}

/// `eps * lambda(1 - rho(1 - y))`
pub fn de_step(dist: &DegreeDistribution, epsilon: f64, y: f64) -> f64 {
    let lambda = dist.lambda.polynomial();
    let rho = dist.rho.polynomial();
    step_with(&lambda, &rho, epsilon, y)
}

fn step_with(
    lambda: &crate::poly::Polynomial,
    rho: &crate::poly::Polynomial,
    epsilon: f64,
    y: f64,
) -> f64 {
    (epsilon * lambda.eval(1.0 - rho.eval(1.0 - y))).clamp(0.0, 1.0)
}

/// Iterates the recursion from `y_0 = epsilon` until `y <= target`, a stall,
/// or `max_iters` steps. Non-convergence is reported in the trace.
pub fn de_trace(
    dist: &DegreeDistribution,
    epsilon: f64,
    target: f64,
    max_iters: usize,
) -> Result<DeTrace> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target {target} outside (0, 1)"
        )));
    }
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    let lambda = dist.lambda.polynomial();
    let rho = dist.rho.polynomial();

    let mut values = vec![epsilon];
    let mut y = epsilon;
    let mut converged = y <= target;
    while !converged && values.len() <= max_iters {
        let next = step_with(&lambda, &rho, epsilon, y);
        values.push(next);
        if next <= target {
            converged = true;
        } else if y - next < STALL_TOL {
            break;
        }
        y = next;
    }
    let iterations_to_target = converged.then(|| values.len() - 1);
    Ok(DeTrace {
        epsilon,
        values,
        converged,
        iterations_to_target,
    })
}

/// Bisects for the largest `eps` whose normalized slack at `alpha = 1` is
/// strictly positive.
pub fn threshold(dist: &DegreeDistribution, tol: f64) -> Result<ThresholdResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol {tol} must be positive")));
    }
    let lambda = dist.lambda.coeffs();
    let rho = dist.rho.polynomial();
    let converges = |eps: f64| -> Result<bool> {
        Ok(certify::min_normalized_slack(lambda, &rho, eps, 1.0)?.min_slack > 0.0)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        threshold: 0.5 * (lo + hi),
        bracket_width: hi - lo,
    })
}

/// Largest observed ratio `y_(l+1) / y_l`.
pub fn empirical_contraction(trace: &DeTrace) -> Result<f64> {
    if trace.values.len() < 2 {
        return Err(Error::TraceTooShort(trace.values.len()));
    }
    Ok(trace
        .values
        .windows(2)
        .filter(|w| w[0] >= RATIO_FLOOR)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max))
}
