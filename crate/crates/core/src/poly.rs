//! Dense univariate polynomials and edge-perspective degree distributions.
//!
//! Everything downstream works on two polynomials built here: the inner map
//! `f(x) = 1 - rho(1 - eps * x)` and its powers `g_i(x) = f(x)^(i-1)`, which
//! make the density-evolution constraint linear in the variable-node
//! coefficients `lambda_i`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients below this magnitude at the top of a polynomial are trimmed.
pub const TRIM_TOL: f64 = 1e-15;

/// Tolerance on the simplex constraint `sum = 1` of a degree distribution.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Dense polynomial in the monomial basis; `coeffs[k]` multiplies `x^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial and trims negligible trailing coefficients.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        p.normalize();
        p
    }

    /// Builds a polynomial keeping every coefficient as given.
    pub fn from_raw(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `c * x^k`
    pub fn monomial(k: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the stored length.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Degree of the canonical form; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Drops trailing coefficients whose magnitude is below [`TRIM_TOL`].
    pub fn normalize(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if c.abs() < TRIM_TOL) {
            self.coeffs.pop();
        }
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// `p(x) / x`, assuming the constant coefficient is zero; it is dropped.
    pub fn div_x(&self) -> Self {
        Self::new(self.coeffs.iter().skip(1).copied().collect())
    }

    /// `x * p(x)`
    pub fn mul_x(&self) -> Self {
        if self.coeffs.is_empty() {
            return Self::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        Self::new(coeffs)
    }

    /// `p^k` by repeated multiplication.
    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// The composition `p(q(x))`, by Horner's scheme over polynomials.
    pub fn compose(&self, q: &Polynomial) -> Self {
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &c| &(&acc * q) + &Self::constant(c))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}x", c.abs())?,
                _ => write!(f, "{}x^{k}", c.abs())?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// Raw map from node degree to edge fraction, e.g. `{2: 0.3, 6: 0.7}`.
pub type Coefficients = BTreeMap<usize, f64>;

/// Checks that a coefficient map has degrees `>= 2` and nonnegative finite
/// entries. The simplex sum is not checked here.
pub fn check_coefficients(coeffs: &Coefficients) -> Result<()> {
    for (&deg, &c) in coeffs {
        if deg < 2 {
            return Err(Error::InvalidDistribution(format!(
                "degree {deg} is below 2"
            )));
        }
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "coefficient {c} at degree {deg} is not a nonnegative number"
            )));
        }
    }
    Ok(())
}

/// Edge-perspective polynomial `sum_d c_d x^(d-1)` of a coefficient map.
pub fn edge_polynomial(coeffs: &Coefficients) -> Polynomial {
    let top = coeffs.keys().next_back().copied().unwrap_or(1);
    let mut out = vec![0.0; top];
    for (&deg, &c) in coeffs {
        if deg >= 1 {
            out[deg - 1] += c;
        }
    }
    Polynomial::new(out)
}

/// One side of a degree distribution: a validated probability vector over
/// node degrees, seen from the edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDegrees {
    coeffs: Coefficients,
}

impl EdgeDegrees {
    pub fn new(coeffs: Coefficients) -> Result<Self> {
        check_coefficients(&coeffs)?;
        if coeffs.is_empty() {
            return Err(Error::InvalidDistribution("no degrees given".into()));
        }
        let sum: f64 = coeffs.values().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "coefficients sum to {sum}, expected 1"
            )));
        }
        Ok(Self { coeffs })
    }

    /// All edges on nodes of a single degree.
    pub fn regular(degree: usize) -> Result<Self> {
        Self::new(BTreeMap::from([(degree, 1.0)]))
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> Result<Self> {
        let mut coeffs = Coefficients::new();
        for (d, c) in pairs {
            *coeffs.entry(d).or_insert(0.0) += c;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.keys().next_back().copied().unwrap_or(2)
    }

    pub fn polynomial(&self) -> Polynomial {
        edge_polynomial(&self.coeffs)
    }

    /// `sum_d c_d / d`, the reciprocal of the average node degree.
    pub fn inverse_mean_degree(&self) -> f64 {
        self.coeffs.iter().map(|(&d, &c)| c / d as f64).sum()
    }
}

/// Variable side `lambda` and check side `rho` of an LDPC ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub lambda: EdgeDegrees,
    pub rho: EdgeDegrees,
}

impl DegreeDistribution {
    pub fn new(lambda: EdgeDegrees, rho: EdgeDegrees) -> Self {
        Self { lambda, rho }
    }

    /// The `(dv, dc)`-regular ensemble.
    pub fn regular(dv: usize, dc: usize) -> Result<Self> {
        Ok(Self::new(EdgeDegrees::regular(dv)?, EdgeDegrees::regular(dc)?))
    }

    pub fn max_variable_degree(&self) -> usize {
        self.lambda.max_degree()
    }

    pub fn max_check_degree(&self) -> usize {
        self.rho.max_degree()
    }

    /// `R = 1 - (sum rho_j / j) / (sum lambda_i / i)`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.rho.inverse_mean_degree() / self.lambda.inverse_mean_degree()
    }
}

/// Binary erasure channel with erasure probability in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    epsilon: f64,
}

impl ChannelSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon < 1.0 {
            Ok(Self { epsilon })
        } else {
            Err(Error::InvalidEpsilon(epsilon))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn capacity(&self) -> f64 {
        1.0 - self.epsilon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rate: f64,
    pub capacity: f64,
    /// `1 - rate / capacity`
    pub gap: f64,
}

impl RateReport {
    pub fn from_rate(rate: f64, ch: ChannelSpec) -> Self {
        let capacity = ch.capacity();
        Self {
            rate,
            capacity,
            gap: 1.0 - rate / capacity,
        }
    }
}

pub fn design_rate(dist: &DegreeDistribution) -> f64 {
    dist.design_rate()
}

/// Rate computed from bare coefficient maps, for solver outputs.
pub fn design_rate_from(lambda: &Coefficients, rho: &Coefficients) -> f64 {
    let inv = |m: &Coefficients| -> f64 { m.iter().map(|(&d, &c)| c / d as f64).sum() };
    1.0 - inv(rho) / inv(lambda)
}

pub fn rate_report(dist: &DegreeDistribution, ch: ChannelSpec) -> RateReport {
    RateReport::from_rate(dist.design_rate(), ch)
}

/// Expands `f(x) = 1 - rho(1 - eps * x)` in the monomial basis.
///
/// The constant coefficient is set to exactly zero, its analytic value when
/// `rho(1) = 1`.
pub fn compose_inner(rho: &Polynomial, epsilon: f64) -> Result<Polynomial> {
    let at_one = rho.eval(1.0);
    if (at_one - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!(
            "rho(1) = {at_one}, expected 1"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    let inner = Polynomial::new(vec![1.0, -epsilon]);
    let composed = rho.compose(&inner);
    let mut coeffs: Vec<f64> = composed.coeffs().iter().map(|&c| -c).collect();
    if coeffs.is_empty() {
        coeffs.push(0.0);
    }
    coeffs[0] = 0.0;
    Ok(Polynomial::new(coeffs))
}

/// `[g_2, ..., g_dv]` with `g_i = f^(i-1)` and `f` from [`compose_inner`].
pub fn constraint_basis(rho: &Polynomial, epsilon: f64, dv: usize) -> Result<Vec<Polynomial>> {
    if dv < 2 {
        return Err(Error::InvalidMaxDegree(dv));
    }
    let f = compose_inner(rho, epsilon)?;
    let mut basis = Vec::with_capacity(dv - 1);
    let mut g = f.clone();
    basis.push(g.clone());
    for _ in 3..=dv {
        g = &g * &f;
        basis.push(g.clone());
    }
    Ok(basis)
}

/// `[g_2 / x, ..., g_dv / x]`, exact because every `g_i(0) = 0`.
pub fn normalized_basis(rho: &Polynomial, epsilon: f64, dv: usize) -> Result<Vec<Polynomial>> {
    Ok(constraint_basis(rho, epsilon, dv)?
        .iter()
        .map(Polynomial::div_x)
        .collect())
}
