//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # alpha sweep
//! rho = x^3
//! epsilon = 0.3
//! dv_max = 6
//! alpha = 0.2:0.1:1.0
//! ```
//!
//! `#` starts a comment that runs to the end of the line. `rho` is either the
//! monomial shorthand `x^k` (all edges on check degree `k + 1`) or a list
//! `j:coeff,j:coeff` of edge-perspective degrees. `alpha` is a
//! `start:step:stop` range or a comma-separated list. Defaults: `alpha =
//! 0.2:0.1:1.0`, `solver = both`, `target = 1e-6`, no output paths.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use fastde::density_evolution::DEFAULT_TARGET;
use fastde::EdgeDegrees;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const KEYS: [&str; 8] = [
    "rho", "epsilon", "dv_max", "alpha", "solver", "target", "out_csv", "out_svg",
];

pub const DEFAULT_ALPHA: &str = "0.2:0.1:1.0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    Lp,
    Sdp,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Lp => "lp",
            SolverKind::Sdp => "sdp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lp" => Some(SolverKind::Lp),
            "sdp" => Some(SolverKind::Sdp),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverChoice {
    Lp,
    Sdp,
    Both,
}

impl SolverChoice {
    pub fn kinds(&self) -> &'static [SolverKind] {
        match self {
            SolverChoice::Lp => &[SolverKind::Lp],
            SolverChoice::Sdp => &[SolverKind::Sdp],
            SolverChoice::Both => &[SolverKind::Lp, SolverKind::Sdp],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverChoice::Lp => "lp",
            SolverChoice::Sdp => "sdp",
            SolverChoice::Both => "both",
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lp" => Ok(SolverChoice::Lp),
            "sdp" => Ok(SolverChoice::Sdp),
            "both" => Ok(SolverChoice::Both),
            other => Err(format!("expected lp, sdp or both, got `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub rho: EdgeDegrees,
    pub epsilon: f64,
    pub dv_max: usize,
    pub alpha_values: Vec<f64>,
    pub solver: SolverChoice,
    pub target: f64,
    pub out_csv: Option<PathBuf>,
    pub out_svg: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Canonical text form; `parse_config(&cfg.render())` gives `cfg` back.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let rho: Vec<String> = self
            .rho
            .coeffs()
            .iter()
            .map(|(j, c)| format!("{j}:{c}"))
            .collect();
        out += &format!("rho = {}\n", rho.join(","));
        out += &format!("epsilon = {}\n", self.epsilon);
        out += &format!("dv_max = {}\n", self.dv_max);
        let alpha: Vec<String> = self.alpha_values.iter().map(|a| a.to_string()).collect();
        out += &format!("alpha = {}\n", alpha.join(","));
        out += &format!("solver = {}\n", self.solver.as_str());
        out += &format!("target = {}\n", self.target);
        if let Some(p) = &self.out_csv {
            out += &format!("out_csv = {}\n", p.display());
        }
        if let Some(p) = &self.out_svg {
            out += &format!("out_svg = {}\n", p.display());
        }
        out
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, &[])
}

/// Parses `text`, then lets each `(key, value)` in `overrides` replace the
/// file's value. Override keys are checked like file keys.
pub fn parse_config_with(
    text: &str,
    overrides: &[(&str, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut raw: BTreeMap<&str, String> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let body = line.split('#').next().unwrap_or_default().trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: format!("expected `key = value`, got `{body}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: "empty key".into(),
            });
        }
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            });
        };
        if raw.insert(known, value.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
    }
    for (key, value) in overrides {
        let Some(&known) = KEYS.iter().find(|k| *k == key) else {
            return Err(ConfigError::UnknownKey {
                line: 0,
                key: key.to_string(),
            });
        };
        raw.insert(known, value.clone());
    }
    build(&raw)
}

fn build(raw: &BTreeMap<&str, String>) -> Result<ExperimentConfig, ConfigError> {
    let get = |key: &'static str| raw.get(key).map(String::as_str);
    let rho = parse_rho(get("rho").ok_or(ConfigError::Missing("rho"))?)?;
    let epsilon = parse_f64("epsilon", get("epsilon").ok_or(ConfigError::Missing("epsilon"))?)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ConfigError::invalid("epsilon", format!("{epsilon} is outside (0, 1)")));
    }
    let dv_text = get("dv_max").ok_or(ConfigError::Missing("dv_max"))?;
    let dv_max: usize = dv_text
        .parse()
        .map_err(|_| ConfigError::invalid("dv_max", format!("`{dv_text}` is not an integer")))?;
    if dv_max < 2 {
        return Err(ConfigError::invalid("dv_max", "must be at least 2"));
    }
    let alpha_values = parse_alpha(get("alpha").unwrap_or(DEFAULT_ALPHA))?;
    let solver = match get("solver") {
        None => SolverChoice::Both,
        Some(s) => s.parse().map_err(|m| ConfigError::invalid("solver", m))?,
    };
    let target = match get("target") {
        None => DEFAULT_TARGET,
        Some(t) => parse_f64("target", t)?,
    };
    if !(target > 0.0 && target < 1.0) {
        return Err(ConfigError::invalid("target", format!("{target} is outside (0, 1)")));
    }
    let path = |key: &'static str| -> Result<Option<PathBuf>, ConfigError> {
        match get(key) {
            None => Ok(None),
            Some("") => Err(ConfigError::invalid(key, "empty path")),
            Some(p) => Ok(Some(PathBuf::from(p))),
        }
    };
    Ok(ExperimentConfig {
        rho,
        epsilon,
        dv_max,
        alpha_values,
        solver,
        target,
        out_csv: path("out_csv")?,
        out_svg: path("out_svg")?,
    })
}

fn parse_f64(key: &str, text: &str) -> Result<f64, ConfigError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| ConfigError::invalid(key, format!("`{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(ConfigError::invalid(key, format!("`{text}` is not finite")));
    }
    Ok(v)
}

/// `x^k`, `x`, or `j:coeff,j:coeff,...`
pub fn parse_rho(text: &str) -> Result<EdgeDegrees, ConfigError> {
    let text = text.trim();
    if let Some(rest) = text.strip_prefix('x') {
        let power = if rest.is_empty() {
            1
        } else {
            rest.strip_prefix('^')
                .and_then(|k| k.trim().parse::<usize>().ok())
                .ok_or_else(|| ConfigError::invalid("rho", format!("bad monomial `{text}`")))?
        };
        if power == 0 {
            return Err(ConfigError::invalid("rho", "check degree must be at least 2"));
        }
        return EdgeDegrees::regular(power + 1).map_err(|e| ConfigError::invalid("rho", e.to_string()));
    }
    parse_degree_list("rho", text)
}

/// `j:coeff,j:coeff,...` as an edge-perspective distribution.
pub fn parse_degree_list(key: &str, text: &str) -> Result<EdgeDegrees, ConfigError> {
    let mut pairs = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        let Some((j, c)) = item.split_once(':') else {
            return Err(ConfigError::invalid(key, format!("expected `degree:coeff`, got `{item}`")));
        };
        let j: usize = j
            .trim()
            .parse()
            .map_err(|_| ConfigError::invalid(key, format!("bad degree in `{item}`")))?;
        pairs.push((j, parse_f64(key, c)?));
    }
    EdgeDegrees::from_pairs(pairs).map_err(|e| ConfigError::invalid(key, e.to_string()))
}

/// Range values are snapped to 12 significant digits so `0.2 + 6 * 0.1`
/// reads back as `0.8`.
pub fn parse_alpha(text: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (
                parse_f64("alpha", start)?,
                parse_f64("alpha", step)?,
                parse_f64("alpha", stop)?,
            );
            if !(step > 0.0) || stop < start {
                return Err(ConfigError::invalid("alpha", "range needs step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            if n > 100_000 {
                return Err(ConfigError::invalid("alpha", "range has too many points"));
            }
            (0..=n).map(|k| snap(start + k as f64 * step)).collect()
        }
        [_] => text
            .split(',')
            .map(|v| parse_f64("alpha", v))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(ConfigError::invalid("alpha", "expected start:step:stop or a list")),
    };
    if values.is_empty() {
        return Err(ConfigError::invalid("alpha", "no values"));
    }
    if let Some(bad) = values.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(ConfigError::invalid("alpha", format!("{bad} is outside (0, 1]")));
    }
    Ok(values)
}

fn snap(v: f64) -> f64 {
    format!("{v:.11e}").parse().expect("formatted float parses")
}
