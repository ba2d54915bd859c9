//! Discretized LP formulation and the exchange (cutting-plane) loop that
//! lifts it to a certified solution of the semi-infinite problem.
//!
//! Each sample point `x_k` contributes the row
//! `sum_i lambda_i * g_i(x_k) / x_k <= alpha`. Dividing by `x_k` keeps rows
//! well scaled near the origin and gives the row at `x = 0` a meaning (the
//! first-order condition), so the exchange loop can cut there too.

pub mod simplex;

use crate::certify::{feasibility_floor, margin_of, slack_from_basis};
use crate::error::Result;
use crate::poly::{normalized_basis, Polynomial};
use crate::problem::{clean_lambda, OptimizationResult, SolveRequest, SolveStatus};

pub use simplex::{simplex_solve, LpSolution, LpStandardForm, LpStatus};

pub const MAX_CUTS: usize = 200;

/// Cuts closer than this to an existing point are not added again.
pub const CUT_DEDUP_TOL: f64 = 1e-10;

fn lp_for_points(basis: &[Polynomial], alpha: f64, points: &[f64]) -> LpStandardForm {
    let nv = basis.len();
    LpStandardForm {
        c: (2..2 + nv).map(|i| 1.0 / i as f64).collect(),
        a: points
            .iter()
            .map(|&x| basis.iter().map(|h| h.eval(x)).collect())
            .collect(),
        b: vec![alpha; points.len()],
        e: vec![vec![1.0; nv]],
        d: vec![1.0],
        lower: vec![0.0; nv],
    }
}

/// Variables `lambda_2..lambda_dv`, objective `sum lambda_i / i`, one
/// equality `sum lambda_i = 1` and one row per grid point.
pub fn build_discretized_lp(req: &SolveRequest) -> Result<LpStandardForm> {
    req.validate()?;
    let basis = normalized_basis(&req.rho, req.epsilon, req.dv)?;
    Ok(lp_for_points(&basis, req.alpha, &req.grid))
}

/// One-shot LP on the request's grid with no certification. Returns the
/// objective `sum lambda_i / i`, or `None` if the LP is infeasible.
pub fn solve_discretized(req: &SolveRequest) -> Result<Option<(f64, Vec<f64>)>> {
    let sol = simplex_solve(&build_discretized_lp(req)?)?;
    Ok((sol.status == LpStatus::Optimal).then_some((sol.objective, sol.x)))
}

/// Exchange loop: solve on the grid, certify on `[0, 1]`, add the worst
/// point as a cut, repeat until certified or [`MAX_CUTS`] is reached.
pub fn solve_semi_infinite(req: &SolveRequest) -> Result<OptimizationResult> {
    req.validate()?;
    let basis = normalized_basis(&req.rho, req.epsilon, req.dv)?;

    let floor = feasibility_floor(&req.rho, req.epsilon, req.dv)?;
    if req.alpha < floor - req.tol {
        return Ok(OptimizationResult::infeasible(0));
    }

    let mut points = req.grid.clone();
    let mut history = Vec::new();
    let mut pivots = 0;
    let mut cuts = 0;
    loop {
        let sol = simplex_solve(&lp_for_points(&basis, req.alpha, &points))?;
        pivots += sol.pivots;
        if sol.status != LpStatus::Optimal {
            let mut out = OptimizationResult::infeasible(pivots);
            out.cuts_added = cuts;
            out.objective_history = history;
            return Ok(out);
        }
        history.push(sol.objective);

        let lambda = clean_lambda(req.dv, &sol.x);
        let margin = margin_of(&slack_from_basis(&lambda, &basis, req.alpha));
        let rate = req.rate_of(&lambda);
        let mut result = OptimizationResult {
            status: SolveStatus::Optimal,
            lambda,
            rate,
            gap: 1.0 - rate / req.capacity(),
            margin: Some(margin),
            solver_iterations: pivots,
            cuts_added: cuts,
            relaxed_tol: None,
            objective_history: history.clone(),
        };
        if margin.min_slack >= -req.tol {
            return Ok(result);
        }
        if cuts >= MAX_CUTS {
            result.status = SolveStatus::IterationLimit;
            return Ok(result);
        }
        let x = margin.argmin_x;
        if points.iter().any(|&p| (p - x).abs() <= CUT_DEDUP_TOL) {
            result.relaxed_tol = Some(-margin.min_slack);
            if !margin.feasible {
                result.status = SolveStatus::IterationLimit;
            }
            return Ok(result);
        }
        let at = points.partition_point(|&p| p < x);
        points.insert(at, x);
        cuts += 1;
    }
}
