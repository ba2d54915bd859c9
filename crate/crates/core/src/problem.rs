//! Request and result types shared by the LP and SOS solver paths.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certify::{check_alpha, MarginReport, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::poly::{Coefficients, EdgeDegrees, Polynomial, SIMPLEX_TOL};

pub const DEFAULT_GRID_POINTS: usize = 64;

/// `n` Chebyshev-Lobatto points `(1 - cos(k pi / n)) / 2`, `k = 1..=n`:
/// clustered at both ends of `(0, 1]` and including `x = 1`.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| 0.5 * (1.0 - (k as f64 * PI / n as f64).cos()))
        .collect()
}

/// One design problem: maximize `sum lambda_i / i` over variable degrees
/// `2..=dv` subject to `eps * lambda(1 - rho(1 - y)) <= alpha * y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    /// Edge-perspective check polynomial.
    pub rho: Polynomial,
    pub epsilon: f64,
    pub alpha: f64,
    pub dv: usize,
    /// Initial sample points in `(0, 1]`, sorted and distinct.
    pub grid: Vec<f64>,
    /// Certification tolerance on the minimum normalized slack.
    pub tol: f64,
}

impl SolveRequest {
    pub fn new(rho: &EdgeDegrees, epsilon: f64, alpha: f64, dv: usize) -> Result<Self> {
        let req = Self {
            rho: rho.polynomial(),
            epsilon,
            alpha,
            dv,
            grid: chebyshev_grid(DEFAULT_GRID_POINTS),
            tol: FEASIBILITY_TOL,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let req = Self {
            alpha,
            ..self.clone()
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_grid(&self, grid: Vec<f64>) -> Result<Self> {
        let req = Self {
            grid,
            ..self.clone()
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        check_alpha(self.alpha)?;
        if self.dv < 2 {
            return Err(Error::InvalidMaxDegree(self.dv));
        }
        if (self.rho.eval(1.0) - 1.0).abs() > SIMPLEX_TOL || self.rho.coeffs().iter().any(|&c| c < 0.0)
        {
            return Err(Error::InvalidDistribution(
                "rho must have nonnegative coefficients summing to 1".into(),
            ));
        }
        if self.rho.coeff(0) != 0.0 {
            return Err(Error::InvalidDistribution(
                "rho must not put mass on degree 1".into(),
            ));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if self.grid.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidGrid("points must lie in (0, 1]".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("points must be sorted and distinct".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn capacity(&self) -> f64 {
        1.0 - self.epsilon
    }

    /// `sum_j rho_j / j`, i.e. the integral of `rho` over `[0, 1]`.
    pub fn rho_inverse_mean_degree(&self) -> f64 {
        self.rho
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, &c)| c / (k + 1) as f64)
            .sum()
    }

    /// Design rate for a variable-side solution of this request.
    pub fn rate_of(&self, lambda: &Coefficients) -> f64 {
        let inv: f64 = lambda.iter().map(|(&d, &c)| c / d as f64).sum();
        1.0 - self.rho_inverse_mean_degree() / inv
    }

    /// Degrees `2..=dv` in variable order.
    pub fn degrees(&self) -> impl Iterator<Item = usize> {
        2..=self.dv
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration-limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub status: SolveStatus,
    /// `lambda_i` for every degree `2..=dv`; empty when infeasible.
    pub lambda: Coefficients,
    pub rate: f64,
    pub gap: f64,
    pub margin: Option<MarginReport>,
    pub solver_iterations: usize,
    pub cuts_added: usize,
    /// Set when a cut landed on an existing grid point while the certified
    /// slack was still below `-tol`; holds the violation actually achieved.
    pub relaxed_tol: Option<f64>,
    /// LP objective `sum lambda_i / i` after each exchange round.
    pub objective_history: Vec<f64>,
}

impl OptimizationResult {
    pub fn infeasible(solver_iterations: usize) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            lambda: BTreeMap::new(),
            rate: f64::NAN,
            gap: f64::NAN,
            margin: None,
            solver_iterations,
            cuts_added: 0,
            relaxed_tol: None,
            objective_history: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// `sum lambda_i / i`
    pub fn objective(&self) -> f64 {
        self.lambda.iter().map(|(&d, &c)| c / d as f64).sum()
    }
}

/// Clips solver round-off below zero and fills every degree `2..=dv`.
pub(crate) fn clean_lambda(dv: usize, values: &[f64]) -> Coefficients {
    (2..=dv)
        .zip(values)
        .map(|(d, &v)| (d, if v < 0.0 { 0.0 } else { v }))
        .collect()
}
