//! Design of LDPC variable-node degree distributions for the binary erasure
//! channel under a fast-convergence density-evolution constraint.
//!
//! The constraint `eps * lambda(1 - rho(1 - y)) <= alpha * y` on `[0, eps]`
//! forces the erasure probability to shrink by at least a factor `alpha`
//! per decoder iteration. Two solver paths maximize the design rate under
//! it: an exchange loop over a dense simplex kernel ([`lp`]) and a
//! sum-of-squares SDP ([`sos`]). [`certify`] checks either result
//! independently and [`density_evolution`] simulates the decoder.

pub mod certify;
pub mod density_evolution;
pub mod error;
pub mod lp;
pub mod poly;
pub mod problem;
pub mod sos;

pub use certify::{feasibility_floor, min_normalized_slack, normalized_slack_poly, MarginReport};
pub use density_evolution::{de_step, de_trace, empirical_contraction, threshold, DeTrace, ThresholdResult};
pub use error::{Error, Result};
pub use lp::{build_discretized_lp, solve_semi_infinite};
pub use poly::{
    compose_inner, constraint_basis, design_rate, rate_report, ChannelSpec, Coefficients,
    DegreeDistribution, EdgeDegrees, Polynomial, RateReport,
};
pub use problem::{OptimizationResult, SolveRequest, SolveStatus};
