//! Sweep results as CSV, written and read back.

use std::path::Path;

use fastde::SolveStatus;

use crate::config::SolverKind;
use crate::error::{CliError, Result};
use crate::sweep::SweepRow;

const FIXED_COLUMNS: [&str; 7] = ["alpha", "solver", "status", "rate", "gap", "min_slack", "iters"];

/// Gap cross-check tolerance on load.
pub const GAP_TOL: f64 = 1e-10;

/// `%.12g`: 12 significant digits, fixed notation for moderate exponents,
/// trailing zeros dropped.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn status_str(s: SolveStatus) -> &'static str {
    s.as_str()
}

fn parse_status(s: &str) -> Option<SolveStatus> {
    [SolveStatus::Optimal, SolveStatus::Infeasible, SolveStatus::IterationLimit]
        .into_iter()
        .find(|st| st.as_str() == s)
}

pub fn header(dv: usize) -> String {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend((2..=dv).map(|i| format!("lambda_{i}")));
    cols.join(",")
}

/// Header plus one line per row. Lambda columns run up to the largest `dv`
/// among the rows; missing values are empty fields.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let dv = rows.iter().map(|r| r.dv).max().unwrap_or(1);
    let mut out = header(dv);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for r in rows {
        let mut fields = vec![
            fmt_num(r.alpha),
            r.solver.as_str().to_string(),
            status_str(r.status).to_string(),
            opt(r.rate),
            opt(r.gap),
            opt(r.min_slack),
            r.iterations_to_target.map(|i| i.to_string()).unwrap_or_default(),
        ];
        for k in 0..dv.saturating_sub(1) {
            fields.push(opt(r.lambda.as_ref().and_then(|l| l.get(k).copied())));
        }
        out += &fields.join(",");
        out.push('\n');
    }
    out
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows)).map_err(|e| CliError::io(path, e))
}

/// Parses CSV written by [`render_csv`] and checks every row's gap against
/// `1 - rate / (1 - epsilon)`.
pub fn parse_csv(text: &str, epsilon: f64) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let head = lines.next().ok_or(CliError::Csv {
        line: 1,
        message: "missing header".into(),
    })?;
    let cols: Vec<&str> = head.split(',').collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(CliError::Csv {
            line: 1,
            message: format!("unexpected header `{head}`"),
        });
    }
    let dv = cols.len() - FIXED_COLUMNS.len() + 1;
    if head != header(dv) {
        return Err(CliError::Csv {
            line: 1,
            message: format!("unexpected lambda columns in `{head}`"),
        });
    }

    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let err = |message: String| CliError::Csv {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(err(format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let num = |i: usize| -> Result<Option<f64>> {
            if fields[i].is_empty() {
                return Ok(None);
            }
            fields[i]
                .parse()
                .map(Some)
                .map_err(|_| err(format!("`{}` in column {} is not a number", fields[i], cols[i])))
        };
        let alpha = num(0)?.ok_or_else(|| err("alpha is empty".into()))?;
        let solver = SolverKind::parse(fields[1]).ok_or_else(|| err(format!("unknown solver `{}`", fields[1])))?;
        let status = parse_status(fields[2]).ok_or_else(|| err(format!("unknown status `{}`", fields[2])))?;
        let rate = num(3)?;
        let gap = num(4)?;
        match (rate, gap) {
            (Some(r), Some(g)) => {
                let expected = 1.0 - r / (1.0 - epsilon);
                if (g - expected).abs() > GAP_TOL {
                    return Err(err(format!("gap {g} disagrees with 1 - rate/(1 - eps) = {expected}")));
                }
            }
            (None, None) => {}
            _ => return Err(err("rate and gap must both be present or both empty".into())),
        }
        let iterations_to_target = if fields[6].is_empty() {
            None
        } else {
            Some(fields[6].parse().map_err(|_| err(format!("bad iteration count `{}`", fields[6])))?)
        };
        let lambda: Vec<Option<f64>> = (FIXED_COLUMNS.len()..cols.len()).map(num).collect::<Result<_>>()?;
        let lambda = if lambda.iter().all(Option::is_none) {
            None
        } else {
            Some(lambda.into_iter().map(|v| v.unwrap_or(0.0)).collect())
        };
        rows.push(SweepRow {
            alpha,
            solver,
            status,
            rate,
            gap,
            min_slack: num(5)?,
            iterations_to_target,
            dv,
            lambda,
        });
    }
    Ok(rows)
}

pub fn load_csv(path: &Path, epsilon: f64) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(&text, epsilon)
}
