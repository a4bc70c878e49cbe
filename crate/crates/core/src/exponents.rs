//! Critical exponents, admissibility ranges and the auxiliary exponents
//! (`β`, `λ`, `δ`, `θ`) that appear in the a priori and uniqueness estimates.
//!
//! Exact rationals are used wherever the value is rational; `p₃` is
//! irrational in general and is returned as `f64`.

use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

fn check_dim(d: usize) -> Result<i64> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    i64::try_from(d).map_err(|_| Error::Domain(format!("dimension {d} too large")))
}

/// `p₁ = 3d/(d+2) ∨ (3d−4)/d`
pub fn p1(d: usize) -> Result<Rational> {
    let d = check_dim(d)?;
    let a = Rational::new(3 * d, d + 2);
    let b = Rational::new(3 * d - 4, d);
    Ok(a.max(b))
}

/// `p₂ = 2d/(d−2)`; `None` stands for `+∞` at `d = 2`.
pub fn p2(d: usize) -> Result<Option<Rational>> {
    let d = check_dim(d)?;
    Ok((d > 2).then(|| Rational::new(2 * d, d - 2)))
}

/// `p₃ = (3d − 8 + √(9d² + 64)) / (2d)`
pub fn p3(d: usize) -> Result<f64> {
    let d = check_dim(d)? as f64;
    Ok((3.0 * d - 8.0 + (9.0 * d * d + 64.0).sqrt()) / (2.0 * d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponents {
    pub p1: Rational,
    pub p2: Option<Rational>,
    pub p3: f64,
}

impl CriticalExponents {
    pub fn p1_f64(&self) -> f64 {
        self.p1.to_f64().unwrap_or(f64::NAN)
    }

    pub fn p2_f64(&self) -> f64 {
        self.p2.map_or(f64::INFINITY, |r| r.to_f64().unwrap_or(f64::NAN))
    }
}

pub fn critical_exponents(d: usize) -> Result<CriticalExponents> {
    Ok(CriticalExponents {
        p1: p1(d)?,
        p2: p2(d)?,
        p3: p3(d)?,
    })
}

/// Existence range, piecewise in `d`:
/// `(p₁,∞)` for `2 ≤ d ≤ 8`, `(p₁,p₂) ∪ (p₃,∞)` for `d = 9`, `(p₃,∞)` for `d ≥ 10`.
pub fn admissible_existence(p: f64, d: usize) -> bool {
    let Ok(c) = critical_exponents(d) else {
        return false;
    };
    match d {
        2..=8 => p > c.p1_f64(),
        9 => (p > c.p1_f64() && p < c.p2_f64()) || p > c.p3,
        _ => p > c.p3,
    }
}

/// The same range in the unified form `(p₁,p₂) ∪ (p₃,∞)`.
pub fn admissible_existence_unified(p: f64, d: usize) -> bool {
    let Ok(c) = critical_exponents(d) else {
        return false;
    };
    (p > c.p1_f64() && p < c.p2_f64()) || p > c.p3
}

/// `1 + d/2`
pub fn uniqueness_threshold(d: usize) -> Result<Rational> {
    let d = check_dim(d)?;
    Ok(Rational::new(d + 2, 2))
}

pub fn uniqueness_ok(p: f64, d: usize) -> bool {
    uniqueness_threshold(d).is_ok_and(|t| p >= t.to_f64().unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    pub value: f64,
    /// `(d, p, α) = (2, 2, 1)`: excluded from the strict-inequality case and
    /// covered separately; the value is still the formula value.
    pub flagged: bool,
}

/// `β(p,α) = 1 + (2/p − 1/2)d − α` if `p < 4d/(d+2α)`, else `1`.
pub fn beta(p: f64, alpha: f64, d: usize) -> Result<Beta> {
    let dd = check_dim(d)? as f64;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("β needs α ∈ (0, 1], got {alpha}")));
    }
    let lower = 2.0 * dd / (dd + 2.0 * alpha);
    if !(p > lower) {
        return Err(Error::Domain(format!("β needs p > 2d/(d+2α) = {lower}, got {p}")));
    }
    let branch = 4.0 * dd / (dd + 2.0 * alpha);
    let value = if p < branch {
        1.0 + (2.0 / p - 0.5) * dd - alpha
    } else {
        1.0
    };
    Ok(Beta {
        value,
        flagged: d == 2 && p == 2.0 && alpha == 1.0,
    })
}

pub fn beta1(p: f64, d: usize) -> Result<Beta> {
    beta(p, 1.0, d)
}

/// `λ = 0` for `d = 2`, `2(3−p)⁺/(dp − 3d + 4)` for `d ≥ 3`.
pub fn lambda(p: f64, d: usize) -> Result<f64> {
    let dd = check_dim(d)? as f64;
    if d == 2 {
        return Ok(0.0);
    }
    let denom = dd * p - 3.0 * dd + 4.0;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "λ needs p > (3d−4)/d = {} for d = {d}, got {p}",
            (3.0 * dd - 4.0) / dd
        )));
    }
    Ok(2.0 * (3.0 - p).max(0.0) / denom)
}

/// `δ = p/(p+2)`
pub fn delta(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("δ needs p > 1, got {p}")));
    }
    Ok(p / (p + 2.0))
}

/// Interpolation exponent `θ = (2d − q(d−2))/(2q)` on `q ∈ (2,∞)` for `d = 2`
/// and `q ∈ [2, 2d/(d−2)]` for `d ≥ 3`.
pub fn theta_gn(q: f64, d: usize) -> Result<f64> {
    let dd = check_dim(d)? as f64;
    let in_range = if d == 2 {
        q > 2.0 && q.is_finite()
    } else {
        (2.0..=2.0 * dd / (dd - 2.0)).contains(&q)
    };
    if !in_range {
        return Err(Error::Domain(format!("q = {q} outside the interpolation range for d = {d}")));
    }
    Ok((2.0 * dd - q * (dd - 2.0)) / (2.0 * q))
}

/// Full exponent summary for one `(d, p)`.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentReport {
    pub d: usize,
    pub p: Option<f64>,
    pub p1: String,
    pub p2: String,
    pub p3: f64,
    pub uniqueness_threshold: String,
    pub admissible_existence: Option<bool>,
    pub lambda: Option<f64>,
    pub beta_p1: Option<f64>,
    pub delta: Option<f64>,
    pub uniqueness_ok: Option<bool>,
}

fn show(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl ExponentReport {
    pub fn new(d: usize, p: Option<f64>) -> Result<Self> {
        let c = critical_exponents(d)?;
        Ok(ExponentReport {
            d,
            p,
            p1: show(&c.p1),
            p2: c.p2.as_ref().map_or_else(|| "inf".to_string(), show),
            p3: c.p3,
            uniqueness_threshold: show(&uniqueness_threshold(d)?),
            admissible_existence: p.map(|p| admissible_existence(p, d)),
            lambda: p.and_then(|p| lambda(p, d).ok()),
            beta_p1: p.and_then(|p| beta1(p, d).ok()).map(|b| b.value),
            delta: p.and_then(|p| delta(p).ok()),
            uniqueness_ok: p.map(|p| uniqueness_ok(p, d)),
        })
    }

    pub const CSV_HEADER: &'static str =
        "d,p,p1,p2,p3,uniqueness_threshold,admissible_existence,lambda,beta_p1,delta,uniqueness_ok";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.17e},{},{},{},{},{},{}",
            self.d,
            opt(self.p),
            self.p1,
            self.p2,
            self.p3,
            self.uniqueness_threshold,
            opt(self.admissible_existence),
            opt(self.lambda),
            opt(self.beta_p1),
            opt(self.delta),
            opt(self.uniqueness_ok),
        )
    }
}

impl fmt::Display for ExponentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d                     {}", self.d)?;
        writeln!(f, "p1                    {}", self.p1)?;
        writeln!(f, "p2                    {}", self.p2)?;
        writeln!(f, "p3                    {:.6}", self.p3)?;
        writeln!(f, "uniqueness threshold  {}", self.uniqueness_threshold)?;
        if let Some(p) = self.p {
            writeln!(f, "p                     {p}")?;
            writeln!(f, "admissible existence  {}", opt(self.admissible_existence))?;
            writeln!(f, "lambda                {}", opt(self.lambda))?;
            writeln!(f, "beta(p,1)             {}", opt(self.beta_p1))?;
            writeln!(f, "delta                 {}", opt(self.delta))?;
            writeln!(f, "uniqueness ok         {}", opt(self.uniqueness_ok))?;
        }
        Ok(())
    }
}
