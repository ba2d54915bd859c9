//! Certification of the fast-convergence constraint on the whole interval.
//!
//! With `g_i(x) = f(x)^(i-1)` and `f(x) = 1 - rho(1 - eps * x)`, a variable
//! distribution `lambda` contracts erasures by at least `alpha` per iteration
//! iff the normalized slack
//!
//! ```text
//! s(x) = alpha - sum_i lambda_i * g_i(x) / x
//! ```
//!
//! is nonnegative on `[0, 1]`. Every `g_i` vanishes at zero, so `s` is a
//! polynomial and its value at `x = 0` is the first-order condition
//! `alpha - lambda_2 * eps * rho'(1)`.
//!
//! Both solvers and the threshold search decide feasibility here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{check_coefficients, normalized_basis, Coefficients, Polynomial};

/// `min_slack >= -FEASIBILITY_TOL` counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Uniform grid size on `[0, 1]` before refinement.
pub const GRID_POINTS: usize = 2048;

/// Bisection on `s'` stops once the bracket is this narrow.
pub const REFINE_WIDTH: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub min_slack: f64,
    pub argmin_x: f64,
    /// `s(0)`
    pub endpoint_slack: f64,
    pub feasible: bool,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// `s(x) = alpha - sum_i lambda_i * g_i(x) / x`
pub fn normalized_slack_poly(
    lambda: &Coefficients,
    rho: &Polynomial,
    epsilon: f64,
    alpha: f64,
) -> Result<Polynomial> {
    check_alpha(alpha)?;
    check_coefficients(lambda)?;
    let dv = lambda.keys().next_back().copied().unwrap_or(2);
    let basis = normalized_basis(rho, epsilon, dv)?;
    Ok(slack_from_basis(lambda, &basis, alpha))
}

/// Same as [`normalized_slack_poly`] with a precomputed `[g_2/x, g_3/x, ...]`.
pub fn slack_from_basis(lambda: &Coefficients, basis: &[Polynomial], alpha: f64) -> Polynomial {
    let mut s = Polynomial::constant(alpha);
    for (&deg, &c) in lambda {
        if c != 0.0 {
            s = &s - &basis[deg - 2].scale(c);
        }
    }
    s
}

/// Global minimum of `s` on `[0, 1]` by grid evaluation plus bisection on
/// `s'` inside every grid cell where `s'` turns from negative to positive.
/// Returns `(min, argmin)`.
pub fn minimize_on_unit_interval(s: &Polynomial) -> (f64, f64) {
    let ds = s.derivative();
    let n = GRID_POINTS;
    let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let mut best = (s.eval(0.0), 0.0);
    let mut consider = |x: f64| {
        let v = s.eval(x);
        if v < best.0 {
            best = (v, x);
        }
    };
    let mut prev_d = ds.eval(0.0);
    for k in 0..n {
        consider(xs[k]);
        if k == 0 {
            continue;
        }
        let d = ds.eval(xs[k]);
        if prev_d < 0.0 && d > 0.0 {
            let (mut lo, mut hi) = (xs[k - 1], xs[k]);
            while hi - lo > REFINE_WIDTH {
                let mid = 0.5 * (lo + hi);
                if ds.eval(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            consider(lo);
            consider(hi);
            consider(0.5 * (lo + hi));
        }
        prev_d = d;
    }
    consider(1.0);
    best
}

pub fn margin_of(s: &Polynomial) -> MarginReport {
    let (min_slack, argmin_x) = minimize_on_unit_interval(s);
    MarginReport {
        min_slack,
        argmin_x,
        endpoint_slack: s.eval(0.0),
        feasible: min_slack >= -FEASIBILITY_TOL,
    }
}

pub fn min_normalized_slack(
    lambda: &Coefficients,
    rho: &Polynomial,
    epsilon: f64,
    alpha: f64,
) -> Result<MarginReport> {
    Ok(margin_of(&normalized_slack_poly(lambda, rho, epsilon, alpha)?))
}

/// Smallest `alpha` for which some `lambda` with maximum degree `dv` is
/// feasible: `max_x g_dv(x) / x`. All mass on degree `dv` is pointwise the
/// smallest left-hand side because `g_dv <= g_i` on `[0, 1]`.
pub fn feasibility_floor(rho: &Polynomial, epsilon: f64, dv: usize) -> Result<f64> {
    let basis = normalized_basis(rho, epsilon, dv)?;
    let top = basis.last().expect("dv >= 2 gives a nonempty basis");
    let (neg_max, _) = minimize_on_unit_interval(&top.scale(-1.0));
    Ok(-neg_max)
}
