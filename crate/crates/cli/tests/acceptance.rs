//! Acceptance criteria 1-9, one PASS/FAIL line each. Runs as a plain binary
//! so the lines are printed on success too; exits nonzero if any fails.

// NaN must fail every check, hence `!(a <= b)` style conditions.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fastde::certify::FEASIBILITY_TOL;
use fastde::density_evolution::DEFAULT_MAX_ITERS;
use fastde::lp::{simplex_solve, solve_discretized, LpStandardForm, LpStatus};
use fastde::problem::chebyshev_grid;
use fastde::sos::{
    build_sos_problem, check_certificate, interval_shapes, solve_sos, CertificateBlock,
    SosCertificate,
};
use fastde::*;
use fastde_cli::sweep::distribution_of;
use fastde_cli::{parse_config, run_sweep, SolverKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SWEEP_CONFIG: &str = "rho = x^3\nepsilon = 0.3\ndv_max = 6\nalpha = 0.2:0.1:1.0\n";

fn sweep_rho() -> EdgeDegrees {
    EdgeDegrees::regular(4).unwrap()
}

fn regular_36() -> DegreeDistribution {
    DegreeDistribution::regular(3, 6).unwrap()
}

fn within(elapsed: Duration, limit: Duration) -> Check {
    if elapsed < limit {
        Ok(format!("{elapsed:.2?}"))
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 / n as f64).collect()
}

fn criterion_1() -> Check {
    let dist = regular_36();
    let start = Instant::now();
    let rate = design_rate(&dist);
    let t = within(start.elapsed(), Duration::from_millis(1))?;
    ensure!((rate - 0.5).abs() <= 1e-12, "rate {rate}");
    Ok(format!("rate {rate} in {t}"))
}

/// `eps* = min_y y / lambda(1 - rho(1 - y))`, the smallest erasure
/// probability with a nonzero fixed point.
fn fixed_point_scan(dist: &DegreeDistribution) -> f64 {
    let lambda = dist.lambda.polynomial();
    let rho = dist.rho.polynomial();
    (1..=200_000)
        .map(|k| {
            let y = k as f64 / 200_000.0;
            y / lambda.eval(1.0 - rho.eval(1.0 - y))
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_2() -> Check {
    let dist = regular_36();
    let start = Instant::now();
    let th = threshold(&dist, 1e-4).map_err(|e| e.to_string())?;
    let t = within(start.elapsed(), Duration::from_secs(1))?;
    let scan = fixed_point_scan(&dist);
    ensure!(
        (0.4284..=0.4304).contains(&th.threshold),
        "threshold {} outside [0.4284, 0.4304]",
        th.threshold
    );
    ensure!(
        (th.threshold - scan).abs() <= 1e-4,
        "bisection {} vs fixed-point scan {scan}",
        th.threshold
    );
    Ok(format!("threshold {:.6} (scan {scan:.6}) in {t}", th.threshold))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let req = SolveRequest::new(&sweep_rho(), 0.3, 1.0, 6).map_err(|e| e.to_string())?;
    let lp = solve_semi_infinite(&req).map_err(|e| e.to_string())?;
    let (sdp, _) = solve_sos(&req).map_err(|e| e.to_string())?;
    let fine = req.with_grid(uniform_grid(20_000)).map_err(|e| e.to_string())?;
    let (obj, _) = solve_discretized(&fine)
        .map_err(|e| e.to_string())?
        .ok_or("fine-grid oracle infeasible")?;
    let oracle = 1.0 - req.rho_inverse_mean_degree() / obj;
    for (name, r) in [("lp", &lp), ("sdp", &sdp)] {
        ensure!(r.is_optimal(), "{name}: {:?}", r.status);
        ensure!((0.5..0.7).contains(&r.rate), "{name}: rate {}", r.rate);
        ensure!(
            (r.rate - oracle).abs() <= 1e-4,
            "{name}: rate {} vs oracle {oracle}",
            r.rate
        );
        let m = min_normalized_slack(&r.lambda, &req.rho, 0.3, 1.0).map_err(|e| e.to_string())?;
        ensure!(m.min_slack >= -1e-9, "{name}: min_slack {}", m.min_slack);
        let dist = distribution_of(&r.lambda, &sweep_rho()).map_err(|e| e.to_string())?;
        let trace = de_trace(&dist, 0.3, 1e-6, DEFAULT_MAX_ITERS).map_err(|e| e.to_string())?;
        ensure!(trace.converged, "{name}: DE trace stalls at {}", trace.last());
    }
    ensure!(
        (lp.rate - sdp.rate).abs() <= 1e-3,
        "lp {} vs sdp {}",
        lp.rate,
        sdp.rate
    );
    let t = within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "lp {:.9} sdp {:.9} oracle {oracle:.9} in {t}",
        lp.rate, sdp.rate
    ))
}

fn sweep_alphas() -> Vec<f64> {
    let mut alphas = vec![0.1, 0.12];
    alphas.extend((2..=10).map(|k| k as f64 / 10.0));
    alphas
}

fn criterion_4() -> Check {
    let mut cfg = parse_config(SWEEP_CONFIG).map_err(|e| e.to_string())?;
    cfg.alpha_values = sweep_alphas();
    let start = Instant::now();
    let rows = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let t = within(start.elapsed(), Duration::from_secs(300))?;
    let floor = feasibility_floor(&sweep_rho().polynomial(), 0.3, 6).map_err(|e| e.to_string())?;
    ensure!((floor - 0.12237).abs() < 1e-4, "floor {floor}");
    ensure!(rows.len() == 2 * cfg.alpha_values.len(), "{} rows", rows.len());
    for r in &rows {
        if r.alpha < floor {
            ensure!(
                r.status == SolveStatus::Infeasible && r.rate.is_none(),
                "alpha {} below floor not flagged ({:?})",
                r.alpha,
                r.status
            );
        } else {
            ensure!(
                r.status == SolveStatus::Optimal,
                "alpha {} {:?}: {:?}",
                r.alpha,
                r.solver,
                r.status
            );
        }
    }
    for kind in [SolverKind::Lp, SolverKind::Sdp] {
        let certified: Vec<_> = rows
            .iter()
            .filter(|r| r.solver == kind && r.alpha >= 0.2 - 1e-12)
            .collect();
        ensure!(certified.len() == 9, "{:?}: {} rows", kind, certified.len());
        for w in certified.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ra, rb) = (a.rate.unwrap(), b.rate.unwrap());
            ensure!(
                rb >= ra - 1e-9,
                "{:?}: rate drops from {ra} at {} to {rb} at {}",
                kind,
                a.alpha,
                b.alpha
            );
            ensure!(
                b.gap.unwrap() <= a.gap.unwrap() + 1e-9 / 0.7,
                "{:?}: gap rises between {} and {}",
                kind,
                a.alpha,
                b.alpha
            );
            ensure!(
                (a.gap.unwrap() - (1.0 - ra / 0.7)).abs() <= 1e-12,
                "gap column inconsistent"
            );
        }
    }
    Ok(format!("{} rows, floor {floor:.7}, in {t}", rows.len()))
}

/// Certified designs at various alpha: the default sweep plus a few denser
/// check sides.
fn certified_designs() -> Vec<(EdgeDegrees, f64, f64, Coefficients)> {
    let mut out = Vec::new();
    let mut cases: Vec<(EdgeDegrees, f64, usize, Vec<f64>)> = vec![(
        sweep_rho(),
        0.3,
        6,
        (2..10).map(|k| k as f64 / 10.0).collect(),
    )];
    cases.push((
        EdgeDegrees::regular(6).unwrap(),
        0.4,
        8,
        vec![0.5, 0.65, 0.8, 0.95],
    ));
    cases.push((
        EdgeDegrees::from_pairs([(4, 0.5), (5, 0.5)]).unwrap(),
        0.35,
        8,
        vec![0.4, 0.6, 0.9],
    ));
    for (rho, eps, dv, alphas) in cases {
        for alpha in alphas {
            let req = SolveRequest::new(&rho, eps, alpha, dv).unwrap();
            let lp = solve_semi_infinite(&req).unwrap();
            if lp.is_optimal() {
                out.push((rho.clone(), eps, alpha, lp.lambda.clone()));
            }
            if dv <= 6 {
                let (sdp, _) = solve_sos(&req).unwrap();
                if sdp.is_optimal() {
                    out.push((rho.clone(), eps, alpha, sdp.lambda));
                }
            }
        }
    }
    out
}

fn criterion_5() -> Check {
    let designs = certified_designs();
    ensure!(designs.len() >= 20, "only {} certified designs", designs.len());
    let mut worst_excess = f64::NEG_INFINITY;
    for (rho, eps, alpha, lambda) in &designs {
        let m = min_normalized_slack(lambda, &rho.polynomial(), *eps, *alpha).unwrap();
        ensure!(m.min_slack >= -FEASIBILITY_TOL, "alpha {alpha}: not certified");
        let dist = distribution_of(lambda, rho).unwrap();
        let trace = de_trace(&dist, *eps, 1e-6, DEFAULT_MAX_ITERS).unwrap();
        let ratio = empirical_contraction(&trace).unwrap();
        ensure!(
            ratio <= alpha + 1e-9,
            "eps {eps} alpha {alpha}: ratio {ratio}"
        );
        worst_excess = worst_excess.max(ratio - alpha);
        let bound = ((1e-6 / eps).ln() / alpha.ln()).ceil() as usize + 2;
        let iters = trace
            .iterations_to_target
            .ok_or(format!("eps {eps} alpha {alpha}: never reaches 1e-6"))?;
        ensure!(
            iters <= bound,
            "eps {eps} alpha {alpha}: {iters} iterations, bound {bound}"
        );
    }
    Ok(format!(
        "{} designs, max ratio - alpha {worst_excess:.3e}",
        designs.len()
    ))
}

fn explicit_sos(rng: &mut ChaCha8Rng, q_degree: usize) -> (Polynomial, SosCertificate) {
    let (parity, shapes) = interval_shapes(q_degree);
    let mut total = Polynomial::zero();
    let mut blocks = Vec::new();
    for shape in &shapes {
        let n = shape.size;
        if n == 0 {
            continue;
        }
        let l: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum()).collect())
            .collect();
        let mut sigma = vec![0.0; 2 * n - 1];
        for i in 0..n {
            for j in 0..n {
                sigma[i + j] += gram[i][j];
            }
        }
        total = &total + &(&shape.multiplier * &Polynomial::from_raw(sigma));
        blocks.push(CertificateBlock {
            multiplier: shape.multiplier.clone(),
            gram,
        });
    }
    let cert = SosCertificate {
        parity,
        blocks,
        matching_residual: f64::NAN,
        min_eigenvalue: f64::NAN,
    };
    (total, cert)
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let deg = rng.gen_range(0..16);
        let (q, cert) = explicit_sos(&mut rng, deg);
        let check = check_certificate(&q, &cert).map_err(|e| e.to_string())?;
        ensure!(check.residual <= 1e-10, "degree {deg}: residual {}", check.residual);
        worst = worst.max(check.residual);
    }

    let mut solved = 0;
    let mut worst_sdp = 0.0_f64;
    let cases = [
        (sweep_rho(), 0.3, 6, (1..=10).map(|k| k as f64 / 10.0).collect::<Vec<_>>()),
        (EdgeDegrees::regular(6).unwrap(), 0.4, 5, vec![0.6, 0.8, 1.0]),
        (EdgeDegrees::from_pairs([(3, 0.3), (5, 0.7)]).unwrap(), 0.25, 6, vec![0.5, 0.9]),
    ];
    for (rho, eps, dv, alphas) in cases {
        for alpha in alphas {
            let req = SolveRequest::new(&rho, eps, alpha, dv).unwrap();
            let (r, cert) = solve_sos(&req).map_err(|e| e.to_string())?;
            if r.status == SolveStatus::Infeasible {
                continue;
            }
            let cert = cert.ok_or(format!("alpha {alpha}: no certificate"))?;
            let lambda: Vec<f64> = req.degrees().map(|d| r.lambda[&d]).collect();
            let q = build_sos_problem(&req).unwrap().q_polynomial(&lambda);
            let check = check_certificate(&q, &cert).map_err(|e| e.to_string())?;
            ensure!(
                check.residual <= 1e-8 && check.min_eigenvalue >= -1e-8,
                "eps {eps} alpha {alpha}: residual {} min eigenvalue {}",
                check.residual,
                check.min_eigenvalue
            );
            worst_sdp = worst_sdp.max(check.residual);
            solved += 1;
        }
    }
    Ok(format!(
        "explicit max residual {worst:.1e}; {solved} SDP certificates, max residual {worst_sdp:.1e}"
    ))
}

/// Best objective over every choice of `n` tight constraints.
fn vertex_enumeration(lp: &LpStandardForm) -> Option<f64> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a.iter().cloned().zip(lp.b.iter().copied()).collect();
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = -1.0;
        rows.push((r, 0.0));
    }
    let m = rows.len();
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let w = nalgebra::DMatrix::from_fn(n, n, |r, c| rows[pick[r]].0[c]);
        let rhs = nalgebra::DVector::from_iterator(n, pick.iter().map(|&k| rows[k].1));
        if let Some(x) = w.lu().solve(&rhs) {
            let feasible = rows
                .iter()
                .all(|(r, b)| r.iter().zip(x.iter()).map(|(a, x)| a * x).sum::<f64>() <= b + 1e-9);
            if feasible {
                let obj: f64 = lp.c.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(obj, |b: f64| b.max(obj)));
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..100 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect())
            .collect();
        let mut b: Vec<f64> = (0..m).map(|_| rng.gen_range(-2..=6) as f64).collect();
        a.push(vec![1.0; n]);
        b.push(10.0);
        let lp = LpStandardForm {
            c,
            a,
            b,
            lower: vec![0.0; n],
            ..Default::default()
        };
        let s = simplex_solve(&lp).map_err(|e| e.to_string())?;
        match vertex_enumeration(&lp) {
            Some(best) => {
                ensure!(s.status == LpStatus::Optimal, "case {case}: {:?}", s.status);
                ensure!(
                    (s.objective - best).abs() <= 1e-9,
                    "case {case}: simplex {} vs enumeration {best}",
                    s.objective
                );
                optimal += 1;
            }
            None => {
                ensure!(s.status == LpStatus::Infeasible, "case {case}: {:?}", s.status);
                infeasible += 1;
            }
        }
    }
    Ok(format!("{optimal} optimal, {infeasible} infeasible"))
}

/// Pinned objective tolerance against the 20,000-point grid: the 1e-9
/// slack tolerance plus the grid's own discretization error.
const FINE_GRID_TOL: f64 = 1e-8;

fn random_config(rng: &mut ChaCha8Rng) -> SolveRequest {
    loop {
        let d = rng.gen_range(3..8usize);
        let w: f64 = rng.gen_range(0.2..1.0);
        let rho = if rng.gen_bool(0.5) {
            EdgeDegrees::regular(d).unwrap()
        } else {
            EdgeDegrees::from_pairs([(d, w), (d + 1, 1.0 - w)]).unwrap()
        };
        let eps = rng.gen_range(0.1..0.5);
        let dv = rng.gen_range(3..9usize);
        let floor = feasibility_floor(&rho.polynomial(), eps, dv).unwrap();
        if floor > 0.95 {
            continue;
        }
        let alpha = rng.gen_range(floor + 0.02..=1.0f64);
        return SolveRequest::new(&rho, eps, alpha, dv).unwrap();
    }
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut max_cuts = 0;
    let mut worst_fine = 0.0_f64;
    for case in 0..20 {
        let req = random_config(&mut rng);
        let r = solve_semi_infinite(&req).map_err(|e| e.to_string())?;
        ensure!(r.cuts_added <= 200, "case {case}: {} cuts", r.cuts_added);
        ensure!(r.is_optimal(), "case {case}: {:?}", r.status);
        ensure!(
            r.margin.unwrap().min_slack >= -req.tol,
            "case {case}: min_slack {}",
            r.margin.unwrap().min_slack
        );
        max_cuts = max_cuts.max(r.cuts_added);
        let obj = r.objective();
        for n in [2, 4, 8, 16, 32, 64, 256, 1024] {
            for grid in [chebyshev_grid(n), uniform_grid(n)] {
                let coarse = req.with_grid(grid).unwrap();
                let (c, _) = solve_discretized(&coarse)
                    .map_err(|e| e.to_string())?
                    .ok_or(format!("case {case}: coarse grid {n} infeasible"))?;
                ensure!(
                    obj <= c + FEASIBILITY_TOL,
                    "case {case}: certified {obj} above {n}-point grid {c}"
                );
            }
        }
        let fine = req.with_grid(chebyshev_grid(20_000)).unwrap();
        let (f, _) = solve_discretized(&fine)
            .map_err(|e| e.to_string())?
            .ok_or(format!("case {case}: fine grid infeasible"))?;
        ensure!(
            (obj - f).abs() <= FINE_GRID_TOL,
            "case {case}: certified {obj} vs fine grid {f}"
        );
        worst_fine = worst_fine.max((obj - f).abs());
    }
    Ok(format!(
        "max {max_cuts} cuts, max |certified - fine| {worst_fine:.2e}"
    ))
}

fn run_cli(dir: &Path) -> std::result::Result<Vec<Vec<u8>>, String> {
    std::fs::write(dir.join("sweep.cfg"), SWEEP_CONFIG).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_fastde"))
        .current_dir(dir)
        .args(["sweep", "--config", "sweep.cfg", "--out-csv", "rate.csv", "--out-svg", "rate.svg"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.status.success(),
        "sweep exited with {}: {}",
        status.status,
        String::from_utf8_lossy(&status.stderr)
    );
    ["rate.csv", "rate.svg", "rate-gap.svg"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}")))
        .collect()
}

fn criterion_9() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_cli(a.path())?;
    let second = run_cli(b.path())?;
    for (name, (x, y)) in ["csv", "svg", "gap svg"].iter().zip(first.iter().zip(&second)) {
        ensure!(x == y, "{name} differs between runs");
    }
    let lines = String::from_utf8_lossy(&first[0]).lines().count();
    ensure!(lines == 19, "csv has {lines} lines");
    Ok(format!(
        "csv {} bytes, svg {} bytes, gap svg {} bytes identical",
        first[0].len(),
        first[1].len(),
        first[2].len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("regular-code rate", criterion_1),
        ("threshold oracle", criterion_2),
        ("sweep configuration solve at alpha = 1", criterion_3),
        ("trade-off monotonicity", criterion_4),
        ("convergence-speed guarantee", criterion_5),
        ("SOS soundness and round trip", criterion_6),
        ("simplex kernel vs vertex enumeration", criterion_7),
        ("cutting-plane certification", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
