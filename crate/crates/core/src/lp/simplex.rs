//! Primal simplex over vertices of the inequality form with Bland's rule.
//!
//! Problems are given as
//!
//! ```text
//! maximize    c^T x
//! subject to  A x <= b,  E x = d,  x >= l
//! ```
//!
//! where a lower bound of `-inf` marks a free variable. A vertex is held as
//! a set of `n` active constraints. Each pivot refactorizes the `n x n`
//! active matrix from the original data, so round-off does not accumulate
//! over long pivot sequences and the cost per pivot is linear in the number
//! of rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;
/// Pivots between full recomputations of the carried residuals.
const RESIDUAL_REFRESH: usize = 32;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LpStandardForm {
    /// Objective coefficients, maximized.
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LpStandardForm {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        let bad = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.lower.len() != n {
            return bad("lower bounds length differs from objective length");
        }
        if self.a.len() != self.b.len() || self.e.len() != self.d.len() {
            return bad("constraint rows and right-hand sides differ in count");
        }
        if self.a.iter().chain(&self.e).any(|row| row.len() != n) {
            return bad("constraint row length differs from objective length");
        }
        let finite = self
            .c
            .iter()
            .chain(&self.b)
            .chain(&self.d)
            .chain(self.a.iter().flatten())
            .chain(self.e.iter().flatten())
            .all(|v| v.is_finite());
        if !finite || self.lower.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidArgument("non-finite LP data".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow prices of the `A x <= b` rows (nonnegative at optimality).
    pub ineq_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, lp: &LpStandardForm, pivots: usize) -> Self {
        Self {
            status,
            x: vec![f64::NAN; lp.num_vars()],
            objective: f64::NAN,
            ineq_duals: vec![f64::NAN; lp.a.len()],
            eq_duals: vec![f64::NAN; lp.e.len()],
            pivots,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    /// `a^T x <= b`
    Ineq,
    /// `a^T x = b`, never released.
    Eq,
    /// `x_j = 0` for a free variable; may be released in either direction
    /// and never re-enters.
    Pseudo,
}

/// Constraint normals in a fixed order: rows of `A`, one bound per
/// variable, rows of `E`, then any phase-one extras.
struct System {
    n: usize,
    /// Row-major, `n` entries per constraint.
    normals: Vec<f64>,
    rhs: Vec<f64>,
    kind: Vec<Kind>,
    norms: Vec<f64>,
}

impl System {
    fn new(n: usize) -> Self {
        Self {
            n,
            normals: Vec::new(),
            rhs: Vec::new(),
            kind: Vec::new(),
            norms: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.rhs.len()
    }

    fn push(&mut self, normal: &[f64], rhs: f64, kind: Kind) {
        debug_assert_eq!(normal.len(), self.n);
        self.norms.push(normal.iter().map(|v| v * v).sum::<f64>().sqrt());
        self.normals.extend_from_slice(normal);
        self.rhs.push(rhs);
        self.kind.push(kind);
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.normals[k * self.n..(k + 1) * self.n]
    }

    fn dot(&self, k: usize, z: &DVector<f64>) -> f64 {
        self.row(k).iter().zip(z.iter()).map(|(a, z)| a * z).sum()
    }

    /// `b_k - a_k^T z` for every constraint.
    fn residuals(&self, z: &DVector<f64>) -> Vec<f64> {
        (0..self.len()).map(|k| self.rhs[k] - self.dot(k, z)).collect()
    }

    fn matrix(&self, active: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| self.row(active[r])[c])
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    Stuck,
}

struct Vertex {
    z: DVector<f64>,
    mu: DVector<f64>,
}

fn vertex_at(sys: &System, active: &[usize], cost: &DVector<f64>) -> Option<Vertex> {
    let w = sys.matrix(active);
    let rhs = DVector::from_iterator(sys.n, active.iter().map(|&k| sys.rhs[k]));
    let z = w.clone().lu().solve(&rhs)?;
    let mu = w.transpose().lu().solve(cost)?;
    Some(Vertex { z, mu })
}

/// Bland's rule: release the lowest-index active constraint whose multiplier
/// has the wrong sign, enter the lowest-index blocking constraint.
fn run(sys: &System, active: &mut [usize], cost: &DVector<f64>, pivots: &mut usize) -> Outcome {
    let m = sys.len();
    let mut is_active = vec![false; m];
    for &k in active.iter() {
        is_active[k] = true;
    }
    let cost_tol = COST_TOL * cost.amax().max(1.0);
    let mut residual: Vec<f64> = Vec::new();
    let mut since_refresh = usize::MAX;
    let mut ad = vec![0.0; m];
    loop {
        if *pivots >= MAX_PIVOTS {
            return Outcome::Stuck;
        }
        let w = sys.matrix(active);
        let lu = w.clone().lu();
        let rhs = DVector::from_iterator(sys.n, active.iter().map(|&k| sys.rhs[k]));
        let (Some(z), Some(mu)) = (lu.solve(&rhs), w.transpose().lu().solve(cost)) else {
            return Outcome::Stuck;
        };
        // Residuals are carried along the pivot steps and recomputed from
        // the factored vertex now and then to keep drift out.
        if since_refresh >= RESIDUAL_REFRESH {
            residual = sys.residuals(&z);
            since_refresh = 0;
        }

        let leaving = (0..sys.n)
            .filter(|&p| match sys.kind[active[p]] {
                Kind::Ineq => mu[p] < -cost_tol,
                Kind::Pseudo => mu[p].abs() > cost_tol,
                Kind::Eq => false,
            })
            .min_by_key(|&p| active[p]);
        let Some(pos) = leaving else {
            return Outcome::Optimal;
        };

        let mut unit = DVector::zeros(sys.n);
        unit[pos] = if mu[pos] > 0.0 { 1.0 } else { -1.0 };
        let Some(dir) = lu.solve(&unit) else {
            return Outcome::Stuck;
        };
        let dir_norm = dir.norm();

        let mut enter: Option<(usize, f64)> = None;
        let d = dir.as_slice();
        for (slot, row) in ad.iter_mut().zip(sys.normals.chunks_exact(sys.n)) {
            *slot = row.iter().zip(d).map(|(a, d)| a * d).sum();
        }
        for k in 0..m {
            if is_active[k] || sys.kind[k] != Kind::Ineq {
                continue;
            }
            if ad[k] <= PIVOT_TOL * sys.norms[k] * dir_norm {
                continue;
            }
            let t = residual[k].max(0.0) / ad[k];
            enter = match enter {
                Some((_, bt)) if t >= bt - 1e-12 * (1.0 + bt) => enter,
                _ => Some((k, t)),
            };
        }
        let Some((k, t)) = enter else {
            return Outcome::Unbounded;
        };
        for (r, a) in residual.iter_mut().zip(&ad) {
            *r -= t * a;
        }
        since_refresh += 1;
        is_active[active[pos]] = false;
        is_active[k] = true;
        active[pos] = k;
        *pivots += 1;
    }
}

/// Picks `n` independent normals, equalities first, by Gram-Schmidt.
fn independent_start(sys: &System, candidates: &[usize]) -> Vec<usize> {
    let mut chosen = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for &k in candidates {
        if chosen.len() == sys.n {
            break;
        }
        let v0 = DVector::from_column_slice(sys.row(k));
        let mut v = v0.clone();
        for q in &ortho {
            let proj = q.dot(&v);
            v -= q * proj;
        }
        let norm = v.norm();
        if norm > RANK_TOL * v0.norm().max(1.0) {
            ortho.push(v / norm);
            chosen.push(k);
        }
    }
    chosen
}

/// Solves `lp` by the two-phase primal simplex method.
pub fn simplex_solve(lp: &LpStandardForm) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let mi = lp.a.len();
    let me = lp.e.len();

    let mut sys = System::new(n);
    for (row, &b) in lp.a.iter().zip(&lp.b) {
        sys.push(row, b, Kind::Ineq);
    }
    for (j, &l) in lp.lower.iter().enumerate() {
        let mut unit = vec![0.0; n];
        if l == f64::NEG_INFINITY {
            unit[j] = 1.0;
            sys.push(&unit, 0.0, Kind::Pseudo);
        } else {
            unit[j] = -1.0;
            sys.push(&unit, -l, Kind::Ineq);
        }
    }
    for (row, &d) in lp.e.iter().zip(&lp.d) {
        sys.push(row, d, Kind::Eq);
    }
    let eq_idx = |r: usize| mi + n + r;

    if n == 0 {
        let ok = lp.b.iter().all(|&b| b >= -PHASE_ONE_TOL)
            && lp.d.iter().all(|&d| d.abs() <= PHASE_ONE_TOL);
        let status = if ok { LpStatus::Optimal } else { LpStatus::Infeasible };
        return Ok(LpSolution {
            status,
            x: Vec::new(),
            objective: if ok { 0.0 } else { f64::NAN },
            ineq_duals: vec![0.0; mi],
            eq_duals: vec![0.0; me],
            pivots: 0,
        });
    }

    let candidates: Vec<usize> = (0..me).map(eq_idx).chain(mi..mi + n).collect();
    let mut active = independent_start(&sys, &candidates);
    if active.len() < n {
        return Err(Error::InvalidArgument("degenerate LP start".into()));
    }
    let scale = 1.0 + lp.b.iter().chain(&lp.d).fold(0.0_f64, |m, v| m.max(v.abs()));
    let zero_cost = DVector::zeros(n);
    let Some(start) = vertex_at(&sys, &active, &zero_cost) else {
        return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, 0));
    };
    let x0 = start.z;
    // Dependent equalities are spans of chosen ones; they only need checking.
    for r in 0..me {
        let k = eq_idx(r);
        if !active.contains(&k) && (sys.dot(k, &x0) - sys.rhs[k]).abs() > PHASE_ONE_TOL * scale {
            return Ok(LpSolution::failed(LpStatus::Infeasible, lp, 0));
        }
    }

    let mut pivots = 0;
    let worst = (0..sys.len())
        .filter(|&k| sys.kind[k] == Kind::Ineq && !active.contains(&k))
        .map(|k| (k, sys.dot(k, &x0) - sys.rhs[k]))
        .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        });
    if let Some((worst_k, _)) = worst.filter(|&(_, v)| v > 0.0) {
        // Phase one in (x, s): every constraint not active at x0 is relaxed
        // by s, and s is minimized from the worst violation at x0.
        let mut p1 = System::new(n + 1);
        for k in 0..sys.len() {
            let mut normal = sys.row(k).to_vec();
            let relaxed = sys.kind[k] == Kind::Ineq && !active.contains(&k);
            normal.push(if relaxed { -1.0 } else { 0.0 });
            p1.push(&normal, sys.rhs[k], sys.kind[k]);
        }
        let s_bound = p1.len();
        let mut unit = vec![0.0; n + 1];
        unit[n] = -1.0;
        p1.push(&unit, 0.0, Kind::Ineq);

        let mut p1_active = active.clone();
        p1_active.push(worst_k);
        let mut p1_cost = DVector::zeros(n + 1);
        p1_cost[n] = -1.0;
        match run(&p1, &mut p1_active, &p1_cost, &mut pivots) {
            Outcome::Optimal => {}
            _ => return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, pivots)),
        }
        let Some(v) = vertex_at(&p1, &p1_active, &p1_cost) else {
            return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, pivots));
        };
        if v.z[n] > PHASE_ONE_TOL * scale {
            return Ok(LpSolution::failed(LpStatus::Infeasible, lp, pivots));
        }
        if !p1_active.contains(&s_bound) {
            // Swap `s >= 0` in for the row that keeps the matrix best
            // conditioned; the vertex moves by at most the phase-one residual.
            let w = p1.matrix(&p1_active);
            let Some(inv) = w.try_inverse() else {
                return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, pivots));
            };
            let pos = (0..n + 1)
                .filter(|&p| p1.kind[p1_active[p]] != Kind::Eq)
                .max_by(|&a, &b| inv[(n, a)].abs().total_cmp(&inv[(n, b)].abs()));
            match pos {
                Some(p) if inv[(n, p)].abs() > 0.0 => p1_active[p] = s_bound,
                _ => return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, pivots)),
            }
        }
        active = p1_active.into_iter().filter(|&k| k != s_bound).collect();
    }

    let cost = DVector::from_column_slice(&lp.c);
    match run(&sys, &mut active, &cost, &mut pivots) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Ok(LpSolution::failed(LpStatus::Unbounded, lp, pivots)),
        Outcome::Stuck => return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, pivots)),
    }
    let Some(v) = vertex_at(&sys, &active, &cost) else {
        return Ok(LpSolution::failed(LpStatus::IterationLimit, lp, pivots));
    };
    let x: Vec<f64> = v.z.iter().copied().collect();
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let mut multipliers = vec![0.0; sys.len()];
    for (p, &k) in active.iter().enumerate() {
        multipliers[k] = v.mu[p];
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        ineq_duals: multipliers[..mi].to_vec(),
        eq_duals: (0..me).map(|r| multipliers[eq_idx(r)]).collect(),
        pivots,
    })
}
