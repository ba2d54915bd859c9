//! Sum-of-squares formulation of the fast-convergence design problem.
//!
//! The constraint polynomial `p(x) = alpha * x - sum_i lambda_i g_i(x)`
//! vanishes at zero, so `p(x) = x q(x)` and nonnegativity on `[0, 1]` is
//! nonnegativity of `q`. For `d = deg q` we use the Markov-Lukacs form
//!
//! ```text
//! d = 2m      q = s0 + x (1 - x) s1     deg s0 <= 2m,  deg s1 <= 2m - 2
//! d = 2m + 1  q = x s0 + (1 - x) s1     deg s0, s1 <= 2m
//! ```
//!
//! where each `s` is a sum of squares `v(x)^T G v(x)` over the monomial
//! vector `v = (1, x, ..., x^k)` with a PSD Gram matrix `G`. The coefficient
//! of `x^l` in `v^T G v` is the anti-diagonal sum `sum_{a+b=l} G_ab`, which
//! makes every coefficient identity affine in `(lambda, G)`.

pub mod sdp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certify::margin_of;
use crate::error::{Error, Result};
use crate::poly::{constraint_basis, Polynomial};
use crate::problem::{clean_lambda, OptimizationResult, SolveRequest, SolveStatus};

use sdp::{BlockSdp, SdpOptions, SdpStatus};

/// Phase-I optimum above this means no `lambda` satisfies the constraint.
pub const PHASE_ONE_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// A coefficient of `p` as an affine function `alpha_coeff * alpha +
/// sum_i lambda_coeffs[i] * lambda_(i+2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    pub alpha_coeff: f64,
    pub lambda_coeffs: Vec<f64>,
}

impl AffineForm {
    pub fn eval(&self, alpha: f64, lambda: &[f64]) -> f64 {
        self.alpha_coeff * alpha
            + self
                .lambda_coeffs
                .iter()
                .zip(lambda)
                .map(|(c, l)| c * l)
                .sum::<f64>()
    }
}

/// One SOS term `w(x) * v(x)^T G v(x)` with `G` of order `size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramShape {
    pub multiplier: Polynomial,
    pub size: usize,
}

/// Gram entry `(block, row, col)` contributing `weight` to a coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramTerm {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosProblem {
    pub num_lambda: usize,
    pub alpha: f64,
    /// Coefficients `Pi_0..Pi_n` of `p(x) = alpha x - sum_i lambda_i g_i(x)`.
    pub pi: Vec<AffineForm>,
    pub parity: Parity,
    pub blocks: Vec<GramShape>,
    /// `matching[l]` lists the Gram entries whose weighted sum must equal
    /// the coefficient `q_l = Pi_(l+1)`.
    pub matching: Vec<Vec<GramTerm>>,
    /// `1 / i` per `lambda_i`.
    pub objective: Vec<f64>,
}

impl SosProblem {
    /// `deg q = n - 1`
    pub fn q_degree(&self) -> usize {
        self.matching.len() - 1
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    /// `q(x) = p(x) / x` at a given `lambda`.
    pub fn q_polynomial(&self, lambda: &[f64]) -> Polynomial {
        Polynomial::from_raw(
            self.pi[1..]
                .iter()
                .map(|f| f.eval(self.alpha, lambda))
                .collect(),
        )
    }
}

/// Interval multipliers and Gram orders for a target degree.
pub fn interval_shapes(q_degree: usize) -> (Parity, Vec<GramShape>) {
    let one = Polynomial::constant(1.0);
    if q_degree % 2 == 0 {
        let m = q_degree / 2;
        let mut blocks = vec![GramShape {
            multiplier: one,
            size: m + 1,
        }];
        if m > 0 {
            blocks.push(GramShape {
                multiplier: Polynomial::new(vec![0.0, 1.0, -1.0]),
                size: m,
            });
        }
        (Parity::Even, blocks)
    } else {
        let m = (q_degree - 1) / 2;
        (
            Parity::Odd,
            vec![
                GramShape {
                    multiplier: Polynomial::new(vec![0.0, 1.0]),
                    size: m + 1,
                },
                GramShape {
                    multiplier: Polynomial::new(vec![1.0, -1.0]),
                    size: m + 1,
                },
            ],
        )
    }
}

fn matching_table(q_degree: usize, blocks: &[GramShape]) -> Vec<Vec<GramTerm>> {
    let mut table = vec![Vec::new(); q_degree + 1];
    for (bi, shape) in blocks.iter().enumerate() {
        for (t, &w) in shape.multiplier.coeffs().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for row in 0..shape.size {
                for col in 0..shape.size {
                    let l = row + col + t;
                    if l <= q_degree {
                        table[l].push(GramTerm {
                            block: bi,
                            row,
                            col,
                            weight: w,
                        });
                    }
                }
            }
        }
    }
    table
}

pub fn build_sos_problem(req: &SolveRequest) -> Result<SosProblem> {
    if req.dv < 2 {
        return Err(Error::InvalidMaxDegree(req.dv));
    }
    req.validate()?;
    let basis = constraint_basis(&req.rho, req.epsilon, req.dv)?;
    let deg_f = req.rho.degree();
    let n = (req.dv - 1) * deg_f;
    let nv = req.dv - 1;
    let pi: Vec<AffineForm> = (0..=n)
        .map(|l| AffineForm {
            alpha_coeff: if l == 1 { 1.0 } else { 0.0 },
            lambda_coeffs: basis.iter().map(|g| -g.coeff(l)).collect(),
        })
        .collect();
    let q_degree = n - 1;
    let (parity, blocks) = interval_shapes(q_degree);
    let matching = matching_table(q_degree, &blocks);
    Ok(SosProblem {
        num_lambda: nv,
        alpha: req.alpha,
        pi,
        parity,
        blocks,
        matching,
        objective: req.degrees().map(|i| 1.0 / i as f64).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateBlock {
    pub multiplier: Polynomial,
    /// Row-major symmetric Gram matrix.
    pub gram: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosCertificate {
    pub parity: Parity,
    pub blocks: Vec<CertificateBlock>,
    pub matching_residual: f64,
    pub min_eigenvalue: f64,
}

impl SosCertificate {
    pub fn is_valid(&self) -> bool {
        self.matching_residual <= 1e-8 && self.min_eigenvalue >= -1e-8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    /// Max absolute coefficient deviation between `q` and the polynomial the
    /// certificate represents.
    pub residual: f64,
    pub min_eigenvalue: f64,
}

fn to_matrix(gram: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = gram.len();
    if gram.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("Gram matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| gram[i][j]))
}

/// Rebuilds `sum_blocks w(x) * v^T G v` by polynomial arithmetic and
/// compares it with `q`, then reports the smallest Gram eigenvalue.
pub fn check_certificate(q: &Polynomial, cert: &SosCertificate) -> Result<CertificateCheck> {
    if cert.blocks.is_empty() {
        return Err(Error::DimensionMismatch("certificate has no blocks".into()));
    }
    let cert_degree = cert
        .blocks
        .iter()
        .map(|b| 2 * b.gram.len().saturating_sub(1) + b.multiplier.degree())
        .max()
        .unwrap_or(0);
    let (parity, shapes) = interval_shapes(cert_degree);
    let layout_ok = parity == cert.parity
        && (shapes.len() == cert.blocks.len()
            || (shapes.len() == cert.blocks.len() + 1 && shapes[1].size == 0))
        && shapes
            .iter()
            .zip(&cert.blocks)
            .all(|(s, b)| s.size == b.gram.len() && s.multiplier == b.multiplier);
    let q_degree = q.degree();
    if !layout_ok || q_degree > cert_degree {
        return Err(Error::DimensionMismatch(format!(
            "certificate blocks do not fit a degree-{q_degree} interval representation"
        )));
    }

    let mut recon = Polynomial::zero();
    let mut min_eig = f64::INFINITY;
    for block in &cert.blocks {
        let g = to_matrix(&block.gram)?;
        let n = g.nrows();
        let mut sigma = vec![0.0; (2 * n).saturating_sub(1).max(1)];
        for a in 0..n {
            for b in 0..n {
                sigma[a + b] += g[(a, b)];
            }
        }
        recon = &recon + &(&block.multiplier * &Polynomial::from_raw(sigma));
        if n > 0 {
            min_eig = min_eig.min(g.symmetric_eigenvalues().min());
        }
    }
    let len = recon.coeffs().len().max(q.coeffs().len());
    let residual = (0..len)
        .map(|k| (recon.coeff(k) - q.coeff(k)).abs())
        .fold(0.0, f64::max);
    Ok(CertificateCheck {
        residual,
        min_eigenvalue: min_eig,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Assembles the block SDP. The nonnegative block holds `lambda`, the upper
/// bound slacks `u_i = 1 - lambda_i` and, in phase one, the shift `t` added
/// to `q`.
fn assemble(prob: &SosProblem, phase_one: bool) -> BlockSdp {
    let nv = prob.num_lambda;
    let lp_size = 2 * nv + usize::from(phase_one);
    let sizes = prob.block_sizes();
    let zero_blocks = || -> Vec<DMatrix<f64>> { sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect() };

    let mut a_blocks = Vec::new();
    let mut a_lp = Vec::new();
    let mut b = Vec::new();

    for (l, terms) in prob.matching.iter().enumerate() {
        let mut blocks = zero_blocks();
        for t in terms {
            blocks[t.block][(t.row, t.col)] += t.weight;
        }
        let form = &prob.pi[l + 1];
        let mut lp = DVector::zeros(lp_size);
        for i in 0..nv {
            lp[i] = -form.lambda_coeffs[i];
        }
        if phase_one && l == 0 {
            lp[2 * nv] = -1.0;
        }
        a_blocks.push(blocks);
        a_lp.push(lp);
        b.push(form.alpha_coeff * prob.alpha);
    }

    let mut lp = DVector::zeros(lp_size);
    lp.rows_mut(0, nv).fill(1.0);
    a_blocks.push(zero_blocks());
    a_lp.push(lp);
    b.push(1.0);

    for i in 0..nv {
        let mut lp = DVector::zeros(lp_size);
        lp[i] = 1.0;
        lp[nv + i] = 1.0;
        a_blocks.push(zero_blocks());
        a_lp.push(lp);
        b.push(1.0);
    }

    let mut c_lp = DVector::zeros(lp_size);
    if phase_one {
        c_lp[2 * nv] = 1.0;
    } else {
        for i in 0..nv {
            c_lp[i] = -prob.objective[i];
        }
    }
    BlockSdp {
        block_sizes: sizes.clone(),
        lp_size,
        a_blocks,
        a_lp,
        b: DVector::from_vec(b),
        c_blocks: zero_blocks(),
        c_lp,
    }
}

fn certificate_from(prob: &SosProblem, grams: &[DMatrix<f64>], lambda: &[f64]) -> SosCertificate {
    let blocks: Vec<CertificateBlock> = prob
        .blocks
        .iter()
        .zip(grams)
        .map(|(shape, g)| CertificateBlock {
            multiplier: shape.multiplier.clone(),
            gram: (0..g.nrows())
                .map(|i| (0..g.ncols()).map(|j| g[(i, j)]).collect())
                .collect(),
        })
        .collect();
    let mut cert = SosCertificate {
        parity: prob.parity,
        blocks,
        matching_residual: f64::NAN,
        min_eigenvalue: f64::NAN,
    };
    let check = check_certificate(&prob.q_polynomial(lambda), &cert)
        .expect("certificate built from its own problem layout");
    cert.matching_residual = check.residual;
    cert.min_eigenvalue = check.min_eigenvalue;
    cert
}

/// Phase one decides feasibility; phase two maximizes `sum lambda_i / i`.
/// A certificate is returned for optimal solves.
pub fn solve_sdp(prob: &SosProblem, tol: f64) -> Result<(SdpSolution, Option<SosCertificate>)> {
    let opts = SdpOptions {
        gap_tol: tol,
        ..SdpOptions::default()
    };
    let nv = prob.num_lambda;

    let phase_one = assemble(prob, true).solve(&opts);
    let shift = phase_one.x_lp[2 * nv];
    let mut iterations = phase_one.iterations;
    let converged = |s: SdpStatus| matches!(s, SdpStatus::Optimal | SdpStatus::NearOptimal);
    if !converged(phase_one.status) || shift > PHASE_ONE_TOL {
        let status = if converged(phase_one.status) || shift > PHASE_ONE_TOL {
            SolveStatus::Infeasible
        } else {
            SolveStatus::IterationLimit
        };
        return Ok((
            SdpSolution {
                lambda: Vec::new(),
                objective: f64::NAN,
                duality_gap: phase_one.duality_gap(),
                iterations,
                status,
            },
            None,
        ));
    }

    let run = assemble(prob, false).solve(&opts);
    iterations += run.iterations;
    let lambda: Vec<f64> = run.x_lp.iter().take(nv).map(|&v| v.max(0.0)).collect();
    let objective = lambda.iter().zip(&prob.objective).map(|(l, c)| l * c).sum();
    let status = match run.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => SolveStatus::Optimal,
        _ => SolveStatus::IterationLimit,
    };
    let cert = (status == SolveStatus::Optimal).then(|| certificate_from(prob, &run.x_blocks, &lambda));
    // An optimum is only reported together with a certificate that checks.
    let status = match &cert {
        Some(c) if !c.is_valid() => SolveStatus::IterationLimit,
        _ => status,
    };
    Ok((
        SdpSolution {
            lambda,
            objective,
            duality_gap: run.duality_gap(),
            iterations,
            status,
        },
        cert,
    ))
}

/// Interior-point iterates stop short of the boundary of the simplex;
/// entries at or below this are tried at exactly zero.
const SNAP_TOL: f64 = 1e-7;

/// Zeroes the near-zero entries of `lambda` and renormalizes. The result is
/// kept only if it loses neither objective nor certified slack and the Gram
/// matrices still represent its `q` to within the original residual.
fn polish(
    prob: &SosProblem,
    req: &SolveRequest,
    lambda: &[f64],
    cert: &SosCertificate,
) -> Option<(Vec<f64>, SosCertificate)> {
    let kept: f64 = lambda.iter().filter(|&&v| v > SNAP_TOL).sum();
    if kept <= 0.0 || lambda.iter().all(|&v| v > SNAP_TOL) {
        return None;
    }
    let snapped: Vec<f64> = lambda
        .iter()
        .map(|&v| if v > SNAP_TOL { v / kept } else { 0.0 })
        .collect();
    let objective = |l: &[f64]| -> f64 { l.iter().zip(&prob.objective).map(|(l, c)| l * c).sum() };
    if objective(&snapped) < objective(lambda) {
        return None;
    }
    let coeffs = clean_lambda(req.dv, &snapped);
    let margin = margin_of(
        &crate::certify::normalized_slack_poly(&coeffs, &req.rho, req.epsilon, req.alpha).ok()?,
    );
    let before = margin_of(
        &crate::certify::normalized_slack_poly(
            &clean_lambda(req.dv, lambda),
            &req.rho,
            req.epsilon,
            req.alpha,
        )
        .ok()?,
    );
    if margin.min_slack < before.min_slack.min(0.0) {
        return None;
    }
    let q = prob.q_polynomial(&snapped);
    let refit = refit_gram(&q, cert)?;
    let check = check_certificate(&q, &refit).ok()?;
    if check.residual > cert.matching_residual.max(1e-9) {
        return None;
    }
    let polished = SosCertificate {
        matching_residual: check.residual,
        min_eigenvalue: check.min_eigenvalue,
        ..refit
    };
    polished.is_valid().then_some((snapped, polished))
}

/// Least-norm change of the Gram entries that makes `cert` represent `q`
/// exactly: `dG = L^T y` with `L L^T y = q - L(G)`, where `L` maps Gram
/// entries to coefficients.
fn refit_gram(q: &Polynomial, cert: &SosCertificate) -> Option<SosCertificate> {
    let len = cert
        .blocks
        .iter()
        .map(|b| 2 * b.gram.len().saturating_sub(1) + b.multiplier.degree() + 1)
        .max()?
        .max(q.coeffs().len());
    // One column of `L` per Gram entry, in block order.
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    for b in &cert.blocks {
        let n = b.gram.len();
        for i in 0..n {
            for j in 0..n {
                let col = b
                    .multiplier
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| (i + j + k, w))
                    .collect();
                columns.push(col);
            }
        }
    }
    let mut llt = DMatrix::zeros(len, len);
    for col in &columns {
        for &(r, a) in col {
            for &(s, b) in col {
                llt[(r, s)] += a * b;
            }
        }
    }
    let mut resid = DVector::zeros(len);
    let mut recon = Polynomial::zero();
    for b in &cert.blocks {
        let n = b.gram.len();
        let mut sigma = vec![0.0; (2 * n).saturating_sub(1).max(1)];
        for (i, row) in b.gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                sigma[i + j] += g;
            }
        }
        recon = &recon + &(&b.multiplier * &Polynomial::from_raw(sigma));
    }
    for k in 0..len {
        resid[k] = q.coeff(k) - recon.coeff(k);
    }
    if resid.amax() == 0.0 {
        return Some(cert.clone());
    }
    let y = llt.svd(true, true).solve(&resid, 1e-12).ok()?;
    let mut out = cert.clone();
    let mut c = 0;
    for b in &mut out.blocks {
        let n = b.gram.len();
        for i in 0..n {
            for j in 0..n {
                b.gram[i][j] += columns[c].iter().map(|&(r, w)| w * y[r]).sum::<f64>();
                c += 1;
            }
        }
    }
    Some(out)
}

/// Full SDP path for a request, with the result certified independently.
pub fn solve_sos(req: &SolveRequest) -> Result<(OptimizationResult, Option<SosCertificate>)> {
    let prob = build_sos_problem(req)?;
    let (mut sol, mut cert) = solve_sdp(&prob, 1e-8)?;
    if sol.status == SolveStatus::Infeasible {
        return Ok((OptimizationResult::infeasible(sol.iterations), None));
    }
    if sol.status == SolveStatus::Optimal {
        if let Some((lambda, polished)) = cert.as_ref().and_then(|c| polish(&prob, req, &sol.lambda, c)) {
            sol.objective = lambda.iter().zip(&prob.objective).map(|(l, c)| l * c).sum();
            sol.lambda = lambda;
            cert = Some(polished);
        }
    }
    let lambda = clean_lambda(req.dv, &sol.lambda);
    let margin = margin_of(&crate::certify::normalized_slack_poly(
        &lambda,
        &req.rho,
        req.epsilon,
        req.alpha,
    )?);
    let rate = req.rate_of(&lambda);
    Ok((
        OptimizationResult {
            status: sol.status,
            lambda,
            rate,
            gap: 1.0 - rate / req.capacity(),
            margin: Some(margin),
            solver_iterations: sol.iterations,
            cuts_added: 0,
            relaxed_tol: None,
            objective_history: vec![sol.objective],
        },
        cert,
    ))
}
