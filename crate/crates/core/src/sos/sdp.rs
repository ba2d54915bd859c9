//! Small dense primal-dual interior-point SDP kernel.
//!
//! Solves
//!
//! ```text
//! minimize    <C, X>
//! subject to  <A_k, X> = b_k,  k = 1..m
//!             X = diag(X_1, ..., X_p, diag(x)),  X_j PSD,  x >= 0
//! ```
//!
//! together with its dual `max b^T y, S = C - sum_k y_k A_k PSD`, from an
//! infeasible start. Directions are HKM with a Mehrotra predictor-corrector.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct BlockSdp {
    pub block_sizes: Vec<usize>,
    pub lp_size: usize,
    /// `a_blocks[k][j]` is the part of `A_k` on dense block `j`.
    pub a_blocks: Vec<Vec<DMatrix<f64>>>,
    /// `a_lp[k]` is the diagonal part of `A_k` on the nonnegative block.
    pub a_lp: Vec<DVector<f64>>,
    pub b: DVector<f64>,
    pub c_blocks: Vec<DMatrix<f64>>,
    pub c_lp: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Stopped early, but the best iterate met the looser acceptance
    /// thresholds in [`SdpOptions`].
    NearOptimal,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpIterate {
    pub x_blocks: Vec<DMatrix<f64>>,
    pub x_lp: DVector<f64>,
    pub y: DVector<f64>,
    pub s_blocks: Vec<DMatrix<f64>>,
    pub s_lp: DVector<f64>,
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SdpIterate {
    pub fn duality_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    pub max_iters: usize,
    /// Absolute duality-gap target.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility target.
    pub feas_tol: f64,
    /// Infeasibility accepted from the best iterate after a stall.
    pub fallback_feas_tol: f64,
    /// Relative gap `|gap| / (1 + |objective|)` accepted after a stall.
    pub fallback_gap_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            fallback_feas_tol: 1e-8,
            fallback_gap_tol: 1e-7,
        }
    }
}

/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.95;

const REFINE_STEPS: usize = 3;

#[derive(Clone)]
struct Snapshot {
    xb: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    y: DVector<f64>,
    sb: Vec<DMatrix<f64>>,
    sl: DVector<f64>,
    p_res: f64,
    d_res: f64,
    rel_gap: f64,
}


fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `t <= 1 / fraction` with `x + t * dx` PSD, via the eigenvalues of
/// `L^-1 dx L^-T` where `x = L L^T`.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let w = sym(&(&linv * dx * linv.transpose()));
    let min_eig = w.symmetric_eigenvalues().min();
    Some(if min_eig < 0.0 { -1.0 / min_eig } else { f64::INFINITY })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

impl BlockSdp {
    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    fn total_dim(&self) -> usize {
        self.block_sizes.iter().sum::<usize>() + self.lp_size
    }

    fn apply_a(&self, xb: &[DMatrix<f64>], xl: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.num_constraints(),
            (0..self.num_constraints()).map(|k| {
                self.a_blocks[k]
                    .iter()
                    .zip(xb)
                    .map(|(a, x)| inner(a, x))
                    .sum::<f64>()
                    + self.a_lp[k].dot(xl)
            }),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut blocks: Vec<DMatrix<f64>> =
            self.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut lp = DVector::zeros(self.lp_size);
        for k in 0..self.num_constraints() {
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            for (out, a) in blocks.iter_mut().zip(&self.a_blocks[k]) {
                *out += a * yk;
            }
            lp += &self.a_lp[k] * yk;
        }
        (blocks, lp)
    }

    fn primal_objective(&self, xb: &[DMatrix<f64>], xl: &DVector<f64>) -> f64 {
        self.c_blocks.iter().zip(xb).map(|(c, x)| inner(c, x)).sum::<f64>() + self.c_lp.dot(xl)
    }

    fn failed_iterate(
        &self,
        x_blocks: Vec<DMatrix<f64>>,
        x_lp: DVector<f64>,
        y: DVector<f64>,
        s_blocks: Vec<DMatrix<f64>>,
        s_lp: DVector<f64>,
    ) -> SdpIterate {
        SdpIterate {
            primal_objective: self.primal_objective(&x_blocks, &x_lp),
            dual_objective: self.b.dot(&y),
            x_blocks,
            x_lp,
            y,
            s_blocks,
            s_lp,
            status: SdpStatus::NumericalFailure,
            iterations: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        }
    }

    pub fn solve(&self, opts: &SdpOptions) -> SdpIterate {
        let m = self.num_constraints();
        let nb = self.block_sizes.len();
        let ntot = self.total_dim() as f64;

        let mut xb: Vec<DMatrix<f64>> = self.block_sizes.iter().map(|&n| DMatrix::identity(n, n)).collect();
        let mut xl = DVector::from_element(self.lp_size, 1.0);
        let mut sb = xb.clone();
        let mut sl = xl.clone();
        let mut y = DVector::zeros(m);

        let b_norm = 1.0 + self.b.norm();
        let c_norm = 1.0
            + (self.c_blocks.iter().map(|c| c.norm_squared()).sum::<f64>() + self.c_lp.norm_squared())
                .sqrt();

        let mut status = SdpStatus::IterationLimit;
        let mut iterations = 0;
        let (mut p_res, mut d_res) = (f64::INFINITY, f64::INFINITY);
        let mut best: Option<Snapshot> = None;

        // A A^T does not depend on the iterate and stays well conditioned.
        let aat = DMatrix::from_fn(m, m, |k, l| {
            (0..nb).map(|j| inner(&self.a_blocks[k][j], &self.a_blocks[l][j])).sum::<f64>()
                + self.a_lp[k].dot(&self.a_lp[l])
        });
        let Some(aat_chol) = aat.cholesky() else {
            return self.failed_iterate(xb, xl, y, sb, sl);
        };

        for iter in 0..=opts.max_iters {
            iterations = iter;
            let rp = &self.b - self.apply_a(&xb, &xl);
            let (aty_b, aty_l) = self.apply_at(&y);
            let rd_b: Vec<DMatrix<f64>> = (0..nb)
                .map(|j| &self.c_blocks[j] - &sb[j] - &aty_b[j])
                .collect();
            let rd_l = &self.c_lp - &sl - aty_l;
            p_res = rp.norm() / b_norm;
            d_res = (rd_b.iter().map(|r| r.norm_squared()).sum::<f64>() + rd_l.norm_squared()).sqrt()
                / c_norm;
            let pobj = self.primal_objective(&xb, &xl);
            let dobj = self.b.dot(&y);
            let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
            let admissible = p_res <= opts.fallback_feas_tol && d_res <= opts.fallback_feas_tol;
            if admissible && best.as_ref().is_none_or(|b| rel_gap < b.rel_gap) {
                best = Some(Snapshot {
                    xb: xb.clone(),
                    xl: xl.clone(),
                    y: y.clone(),
                    sb: sb.clone(),
                    sl: sl.clone(),
                    p_res,
                    d_res,
                    rel_gap,
                });
            }
            if p_res <= opts.feas_tol && d_res <= opts.feas_tol && (pobj - dobj).abs() <= opts.gap_tol {
                status = SdpStatus::Optimal;
                break;
            }
            if iter == opts.max_iters {
                break;
            }
            let mu = (xb.iter().zip(&sb).map(|(x, s)| inner(x, s)).sum::<f64>() + xl.dot(&sl)) / ntot;

            let Some(s_inv) = sb
                .iter()
                .map(|s| s.clone().cholesky().map(|c| c.inverse()))
                .collect::<Option<Vec<_>>>()
            else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let sl_inv = sl.map(|v| 1.0 / v);

            // Schur complement M_kl = sum_j <A_lj, X_j A_kj S_j^-1> + sum_i a_ki a_li x_i / s_i
            let mut schur = DMatrix::zeros(m, m);
            let xa_sinv: Vec<Vec<DMatrix<f64>>> = (0..m)
                .map(|k| (0..nb).map(|j| &xb[j] * &self.a_blocks[k][j] * &s_inv[j]).collect())
                .collect();
            let ratio = xl.component_mul(&sl_inv);
            for k in 0..m {
                for l in k..m {
                    let mut v: f64 = (0..nb).map(|j| inner(&self.a_blocks[l][j], &xa_sinv[k][j])).sum();
                    v += self.a_lp[k].component_mul(&self.a_lp[l]).dot(&ratio);
                    schur[(k, l)] = v;
                    schur[(l, k)] = v;
                }
            }
            let Some(chol) = schur.clone().cholesky().or_else(|| {
                let shift = 1e-14 * schur.diagonal().amax().max(1e-300);
                (schur.clone() + DMatrix::identity(m, m) * shift).cholesky()
            }) else {
                status = SdpStatus::NumericalFailure;
                break;
            };

            // One direction for a complementarity target sigma * mu and an
            // optional second-order correction.
            let direction = |sigma_mu: f64,
                             corr: Option<(&[DMatrix<f64>], &DVector<f64>)>|
             -> (Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>, DVector<f64>) {
                // K = sigma mu S^-1 - X - X Rd S^-1 - corr
                let mut kb: Vec<DMatrix<f64>> = (0..nb)
                    .map(|j| &s_inv[j] * sigma_mu - &xb[j] - &xb[j] * &rd_b[j] * &s_inv[j])
                    .collect();
                let mut kl = sl_inv.map(|v| v * sigma_mu) - &xl - xl.component_mul(&rd_l).component_mul(&sl_inv);
                if let Some((cb, cl)) = corr {
                    for j in 0..nb {
                        kb[j] -= &cb[j] * &s_inv[j];
                    }
                    kl -= cl.component_mul(&sl_inv);
                }
                let rhs = &rp - self.apply_a(&kb, &kl);
                let dx_of = |dy: &DVector<f64>| {
                    let (atdy_b, atdy_l) = self.apply_at(dy);
                    let dx_b: Vec<DMatrix<f64>> = (0..nb)
                        .map(|j| sym(&(&kb[j] + &xb[j] * &atdy_b[j] * &s_inv[j])))
                        .collect();
                    let dx_l = &kl + xl.component_mul(&atdy_l).component_mul(&sl_inv);
                    (dx_b, dx_l, atdy_b, atdy_l)
                };
                // Iterative refinement: the Schur solve loses accuracy as
                // mu -> 0, so correct dy until A(dX) reproduces rp.
                let mut dy = chol.solve(&rhs);
                let mut parts = dx_of(&dy);
                for _ in 0..REFINE_STEPS {
                    let resid = &rp - self.apply_a(&parts.0, &parts.1);
                    if resid.norm() <= 1e-15 * b_norm {
                        break;
                    }
                    dy += chol.solve(&resid);
                    parts = dx_of(&dy);
                }
                let (mut dx_b, mut dx_l, atdy_b, atdy_l) = parts;
                // Whatever the Schur solve still misses is projected out so
                // the primal residual keeps shrinking with the step.
                let resid = &rp - self.apply_a(&dx_b, &dx_l);
                let (fix_b, fix_l) = self.apply_at(&aat_chol.solve(&resid));
                for j in 0..nb {
                    dx_b[j] += &fix_b[j];
                }
                dx_l += fix_l;
                let ds_b: Vec<DMatrix<f64>> = (0..nb).map(|j| &rd_b[j] - &atdy_b[j]).collect();
                let ds_l = &rd_l - &atdy_l;
                (dx_b, dx_l, dy, ds_b, ds_l)
            };

            let steps = |dx_b: &[DMatrix<f64>], dx_l: &DVector<f64>, ds_b: &[DMatrix<f64>], ds_l: &DVector<f64>| {
                let mut tp = max_step_lp(&xl, dx_l);
                let mut td = max_step_lp(&sl, ds_l);
                for j in 0..nb {
                    tp = tp.min(max_step_psd(&xb[j], &dx_b[j]).unwrap_or(0.0));
                    td = td.min(max_step_psd(&sb[j], &ds_b[j]).unwrap_or(0.0));
                }
                (tp, td)
            };

            // Predictor
            let (dxa_b, dxa_l, _, dsa_b, dsa_l) = direction(0.0, None);
            let (tpa, tda) = steps(&dxa_b, &dxa_l, &dsa_b, &dsa_l);
            let (tpa, tda) = (tpa.min(1.0), tda.min(1.0));
            let mu_aff = ((0..nb)
                .map(|j| inner(&(&xb[j] + &dxa_b[j] * tpa), &(&sb[j] + &dsa_b[j] * tda)))
                .sum::<f64>()
                + (&xl + &dxa_l * tpa).dot(&(&sl + &dsa_l * tda)))
                / ntot;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector
            let corr_b: Vec<DMatrix<f64>> = (0..nb).map(|j| &dxa_b[j] * &dsa_b[j]).collect();
            let corr_l = dxa_l.component_mul(&dsa_l);
            let (dx_b, dx_l, dy, ds_b, ds_l) = direction(sigma * mu, Some((&corr_b, &corr_l)));
            let (tp, td) = steps(&dx_b, &dx_l, &ds_b, &ds_l);
            let tp = (STEP_FRACTION * tp).min(1.0);
            let td = (STEP_FRACTION * td).min(1.0);
            if tp <= 0.0 || td <= 0.0 {
                status = SdpStatus::NumericalFailure;
                break;
            }

            for j in 0..nb {
                xb[j] += &dx_b[j] * tp;
                sb[j] += &ds_b[j] * td;
                xb[j] = sym(&xb[j]);
                sb[j] = sym(&sb[j]);
            }
            xl += &dx_l * tp;
            sl += &ds_l * td;
            y += &dy * td;
        }

        if status != SdpStatus::Optimal {
            if let Some(b) = best {
                if b.rel_gap <= opts.fallback_gap_tol {
                    status = SdpStatus::NearOptimal;
                    (xb, xl, y, sb, sl) = (b.xb, b.xl, b.y, b.sb, b.sl);
                    (p_res, d_res) = (b.p_res, b.d_res);
                }
            }
        }
        let primal_objective = self.primal_objective(&xb, &xl);
        let dual_objective = self.b.dot(&y);
        SdpIterate {
            x_blocks: xb,
            x_lp: xl,
            y,
            s_blocks: sb,
            s_lp: sl,
            status,
            iterations,
            primal_objective,
            dual_objective,
            primal_residual: p_res,
            dual_residual: d_res,
        }
    }
}
