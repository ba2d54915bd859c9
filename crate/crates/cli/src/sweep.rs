//! The alpha sweep: one solve per `(alpha, solver)`, each certified and
//! simulated.

use fastde::density_evolution::DEFAULT_MAX_ITERS;
use fastde::sos::solve_sos;
use fastde::{
    de_trace, solve_semi_infinite, Coefficients, DegreeDistribution, EdgeDegrees,
    OptimizationResult, SolveRequest, SolveStatus,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SolverKind};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub solver: SolverKind,
    pub status: SolveStatus,
    pub rate: Option<f64>,
    pub gap: Option<f64>,
    pub min_slack: Option<f64>,
    pub iterations_to_target: Option<usize>,
    /// Maximum variable degree; the row carries `lambda_2..lambda_dv`.
    pub dv: usize,
    pub lambda: Option<Vec<f64>>,
}

impl SweepRow {
    /// Optimal rows with a rate; the only rows that are plotted.
    pub fn is_plottable(&self) -> bool {
        self.status == SolveStatus::Optimal && self.rate.is_some()
    }
}

/// Runs one solver on one request.
pub fn solve_with(kind: SolverKind, req: &SolveRequest) -> fastde::Result<OptimizationResult> {
    match kind {
        SolverKind::Lp => solve_semi_infinite(req),
        SolverKind::Sdp => Ok(solve_sos(req)?.0),
    }
}

/// Distribution object for a solver's `lambda` with zero entries dropped and
/// round-off in the sum removed.
pub fn distribution_of(lambda: &Coefficients, rho: &EdgeDegrees) -> fastde::Result<DegreeDistribution> {
    let total: f64 = lambda.values().sum();
    let cleaned: Coefficients = lambda
        .iter()
        .filter(|(_, &v)| v > 0.0)
        .map(|(&d, &v)| (d, v / total))
        .collect();
    Ok(DegreeDistribution::new(EdgeDegrees::new(cleaned)?, rho.clone()))
}

fn row_for(cfg: &ExperimentConfig, alpha: f64, kind: SolverKind) -> Result<SweepRow> {
    let req = SolveRequest::new(&cfg.rho, cfg.epsilon, alpha, cfg.dv_max)?;
    let result = solve_with(kind, &req)?;
    let mut row = SweepRow {
        alpha,
        solver: kind,
        status: result.status,
        rate: None,
        gap: None,
        min_slack: None,
        iterations_to_target: None,
        dv: cfg.dv_max,
        lambda: None,
    };
    if result.status == SolveStatus::Infeasible {
        return Ok(row);
    }
    let dist = distribution_of(&result.lambda, &cfg.rho)?;
    let trace = de_trace(&dist, cfg.epsilon, cfg.target, DEFAULT_MAX_ITERS)?;
    row.rate = Some(result.rate);
    row.gap = Some(1.0 - result.rate / (1.0 - cfg.epsilon));
    row.min_slack = result.margin.map(|m| m.min_slack);
    row.iterations_to_target = trace.iterations_to_target;
    row.lambda = Some(req.degrees().map(|d| result.lambda[&d]).collect());
    Ok(row)
}

/// Solves every `(alpha, solver)` pair in parallel. Rows come back sorted by
/// alpha, then solver (`lp` before `sdp`), whatever the completion order.
/// An infeasible alpha yields a flagged row and never stops the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(f64, SolverKind)> = cfg
        .alpha_values
        .iter()
        .flat_map(|&a| cfg.solver.kinds().iter().map(move |&k| (a, k)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(alpha, kind)| row_for(cfg, alpha, kind))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.solver.cmp(&b.solver)));
    Ok(rows)
}
