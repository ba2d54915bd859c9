use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fastde::density_evolution::{DEFAULT_MAX_ITERS, DEFAULT_TARGET};
use fastde::sos::{build_sos_problem, check_certificate, solve_sos, SosCertificate};
use fastde::{
    de_trace, empirical_contraction, min_normalized_slack, threshold, DegreeDistribution,
    Polynomial, SolveRequest, SolveStatus,
};
use fastde_cli::config::{parse_degree_list, parse_rho, SolverKind};
use fastde_cli::csv::fmt_num;
use fastde_cli::error::{CliError, Result};
use fastde_cli::{
    emit_csv, emit_svg_plot, gap_path, parse_config_with, run_sweep, solve_with, ExperimentConfig,
    PlotField,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "fastde", version, about = "Fast-convergence LDPC degree distributions on the BEC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one alpha; prints lambda, rate, gap and margin.
    Optimize {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Write the SOS certificate of the sdp solve as JSON.
        #[arg(long)]
        cert_out: Option<PathBuf>,
    },
    /// Alpha sweep to CSV plus rate and gap SVG plots.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Density-evolution trace of a design, as CSV.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_TARGET)]
        target: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BP threshold of a design by bisection.
    Threshold {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Certify a given lambda against the constraint at alpha.
    Verify {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Recheck a certificate written by `optimize --cert-out`.
    CertifySos {
        cert: PathBuf,
    },
}

/// Every flag mirrors a config key and overrides the file's value.
#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    dv_max: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out_csv: Option<String>,
    #[arg(long)]
    out_svg: Option<String>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            None => String::new(),
        };
        let flags = [
            ("rho", &self.rho),
            ("epsilon", &self.epsilon),
            ("dv_max", &self.dv_max),
            ("alpha", &self.alpha),
            ("solver", &self.solver),
            ("target", &self.target),
            ("out_csv", &self.out_csv),
            ("out_svg", &self.out_svg),
        ];
        let overrides: Vec<(&str, String)> = flags
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone())))
            .collect();
        Ok(parse_config_with(&text, &overrides)?)
    }
}

#[derive(Args)]
struct DesignArgs {
    /// Variable side, `i:coeff,i:coeff`.
    #[arg(long)]
    lambda: String,
    /// Check side, `x^k` or `j:coeff,j:coeff`.
    #[arg(long)]
    rho: String,
}

impl DesignArgs {
    fn distribution(&self) -> Result<DegreeDistribution> {
        Ok(DegreeDistribution::new(
            parse_degree_list("lambda", &self.lambda)?,
            parse_rho(&self.rho)?,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct CertificateFile {
    /// `q(x) = s(x) / x`, the polynomial the certificate represents.
    q: Polynomial,
    certificate: SosCertificate,
}

enum Outcome {
    Success,
    Infeasible,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Optimize { exp, cert_out } => optimize(&exp.load()?, cert_out.as_deref()),
        Command::Sweep { exp } => sweep(&exp.load()?),
        Command::Simulate {
            design,
            epsilon,
            target,
            max_iters,
            out,
        } => simulate(&design.distribution()?, epsilon, target, max_iters, out.as_deref()),
        Command::Threshold { design, tol } => {
            let r = threshold(&design.distribution()?, tol)?;
            println!("threshold {}", fmt_num(r.threshold));
            println!("bracket_width {}", fmt_num(r.bracket_width));
            Ok(Outcome::Success)
        }
        Command::Verify {
            design,
            epsilon,
            alpha,
        } => {
            let dist = design.distribution()?;
            let m = min_normalized_slack(dist.lambda.coeffs(), &dist.rho.polynomial(), epsilon, alpha)?;
            println!("min_slack {}", fmt_num(m.min_slack));
            println!("argmin_x {}", fmt_num(m.argmin_x));
            println!("feasible {}", m.feasible);
            Ok(if m.feasible {
                Outcome::Success
            } else {
                Outcome::Infeasible
            })
        }
        Command::CertifySos { cert } => {
            let text = std::fs::read_to_string(&cert).map_err(|e| CliError::io(&cert, e))?;
            let file: CertificateFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", cert.display())))?;
            let check = check_certificate(&file.q, &file.certificate)?;
            let ok = check.residual <= 1e-8 && check.min_eigenvalue >= -1e-8;
            println!("residual {}", fmt_num(check.residual));
            println!("min_eigenvalue {}", fmt_num(check.min_eigenvalue));
            println!("valid {ok}");
            Ok(if ok { Outcome::Success } else { Outcome::Infeasible })
        }
    }
}

fn optimize(cfg: &ExperimentConfig, cert_out: Option<&Path>) -> Result<Outcome> {
    let [alpha] = cfg.alpha_values[..] else {
        return Err(CliError::Input(format!(
            "optimize takes a single alpha, got {}",
            cfg.alpha_values.len()
        )));
    };
    let kinds = cfg.solver.kinds();
    if cert_out.is_some() && !kinds.contains(&SolverKind::Sdp) {
        return Err(CliError::Input("--cert-out needs the sdp solver".into()));
    }
    let req = SolveRequest::new(&cfg.rho, cfg.epsilon, alpha, cfg.dv_max)?;
    let mut all_optimal = true;
    for &kind in kinds {
        let result = if kind == SolverKind::Sdp {
            let (result, cert) = solve_sos(&req)?;
            if let (Some(path), Some(cert)) = (cert_out, cert) {
                let lambda: Vec<f64> = req.degrees().map(|d| result.lambda[&d]).collect();
                let file = CertificateFile {
                    q: build_sos_problem(&req)?.q_polynomial(&lambda),
                    certificate: cert,
                };
                let json = serde_json::to_string_pretty(&file).expect("certificate serializes");
                std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))?;
            }
            result
        } else {
            solve_with(kind, &req)?
        };
        println!("[{}] status {}", kind.as_str(), result.status.as_str());
        all_optimal &= result.status == SolveStatus::Optimal;
        if result.status == SolveStatus::Infeasible {
            continue;
        }
        for (d, v) in &result.lambda {
            println!("[{}] lambda_{d} {}", kind.as_str(), fmt_num(*v));
        }
        println!("[{}] rate {}", kind.as_str(), fmt_num(result.rate));
        println!("[{}] gap {}", kind.as_str(), fmt_num(result.gap));
        if let Some(m) = result.margin {
            println!(
                "[{}] min_slack {} at x = {}",
                kind.as_str(),
                fmt_num(m.min_slack),
                fmt_num(m.argmin_x)
            );
        }
    }
    Ok(if all_optimal {
        Outcome::Success
    } else {
        Outcome::Infeasible
    })
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = run_sweep(cfg)?;
    let csv = cfg.out_csv.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let svg = cfg.out_svg.clone().unwrap_or_else(|| PathBuf::from("sweep.svg"));
    emit_csv(&rows, &csv)?;
    emit_svg_plot(&rows, PlotField::Rate, &svg)?;
    let gap_svg = gap_path(&svg);
    emit_svg_plot(&rows, PlotField::Gap, &gap_svg)?;
    let flagged = rows.iter().filter(|r| r.status != SolveStatus::Optimal).count();
    println!(
        "{} rows ({flagged} not optimal) -> {}, {}, {}",
        rows.len(),
        csv.display(),
        svg.display(),
        gap_svg.display()
    );
    Ok(Outcome::Success)
}

fn simulate(
    dist: &DegreeDistribution,
    epsilon: f64,
    target: f64,
    max_iters: usize,
    out: Option<&Path>,
) -> Result<Outcome> {
    let trace = de_trace(dist, epsilon, target, max_iters)?;
    let mut text = String::from("iter,y\n");
    for (l, y) in trace.values.iter().enumerate() {
        text += &format!("{l},{}\n", fmt_num(*y));
    }
    match out {
        Some(path) => std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?,
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    let ratio = empirical_contraction(&trace).ok();
    eprintln!(
        "converged {} iterations_to_target {} max_ratio {}",
        trace.converged,
        trace.iterations_to_target.map(|i| i.to_string()).unwrap_or("-".into()),
        ratio.map(fmt_num).unwrap_or("-".into())
    );
    Ok(if trace.converged {
        Outcome::Success
    } else {
        Outcome::Infeasible
    })
}
