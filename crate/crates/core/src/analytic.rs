//! Closed-form invasion calculus for monomorphic and dimorphic populations.
//!
//! For a population playing `α` in landscape `(μ, κ, Σ)`:
//!
//! ```text
//! r_α      = α·μ − α·Σα/2                      stochastic growth rate
//! θ        = α·Σα / (2⟨α,α⟩_κ)                 Gamma scale
//! k        = 2α·μ/(α·Σα) − 1                   Gamma shape
//! I(α,β)   = r_β − (⟨α,β⟩_κ/⟨α,α⟩_κ) r_α       if r_α > 0, else r_β
//! C_{α,β}  = ⟨β,α⟩_κ/⟨β,β⟩_κ
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{dot, kappa_inner_unchecked, Landscape, Strategy};

/// Default band around zero inside which a sign is reported as undecided.
pub const TOL_ZERO: f64 = 1e-9;
/// Strategies closer than this in the sup norm are treated as identical.
pub const TOL_DEGENERATE: f64 = 1e-12;

fn check(landscape: &Landscape, s: &Strategy) -> Result<()> {
    landscape.check_len("strategy", s.len())
}

/// `α·μ − (α·Σα)/2`.
pub fn stochastic_growth_rate(landscape: &Landscape, a: &Strategy) -> Result<f64> {
    check(landscape, a)?;
    Ok(growth_rate_unchecked(landscape, a.alpha()))
}

pub(crate) fn growth_rate_unchecked(landscape: &Landscape, a: &[f64]) -> f64 {
    dot(a, landscape.mu()) - landscape.sigma_form(a, a) / 2.0
}

/// Gamma(k, θ) stationary law of total abundance for a persisting population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaStationary {
    pub theta: f64,
    pub k: f64,
    pub mean: f64,
}

pub fn stationary_gamma(landscape: &Landscape, a: &Strategy) -> Result<GammaStationary> {
    check(landscape, a)?;
    let alpha = a.alpha();
    let r = growth_rate_unchecked(landscape, alpha);
    let var = landscape.sigma_form(alpha, alpha);
    if var <= 0.0 {
        return Err(Error::DegenerateNoise);
    }
    if r <= 0.0 {
        return Err(Error::NoStationaryDistribution { growth_rate: r });
    }
    let q = kappa_inner_unchecked(alpha, alpha, landscape.kappa());
    let theta = var / (2.0 * q);
    let k = 2.0 * dot(alpha, landscape.mu()) / var - 1.0;
    Ok(GammaStationary {
        theta,
        k,
        mean: k * theta,
    })
}

/// Long-run time average of abundance, `max(r_α, 0)/⟨α,α⟩_κ`. Unlike
/// [`stationary_gamma`] this is also defined without noise.
pub fn mean_abundance(landscape: &Landscape, a: &Strategy) -> Result<f64> {
    check(landscape, a)?;
    let alpha = a.alpha();
    let r = growth_rate_unchecked(landscape, alpha);
    Ok(r.max(0.0) / kappa_inner_unchecked(alpha, alpha, landscape.kappa()))
}

/// Growth rate of a rare `invader` against `resident` at its stationary state.
pub fn invasion_rate(
    landscape: &Landscape,
    resident: &Strategy,
    invader: &Strategy,
) -> Result<f64> {
    check(landscape, resident)?;
    check(landscape, invader)?;
    Ok(invasion_rate_unchecked(
        landscape,
        resident.alpha(),
        invader.alpha(),
    ))
}

pub(crate) fn invasion_rate_unchecked(landscape: &Landscape, a: &[f64], b: &[f64]) -> f64 {
    let r_a = growth_rate_unchecked(landscape, a);
    let r_b = growth_rate_unchecked(landscape, b);
    if r_a > 0.0 {
        let kappa = landscape.kappa();
        r_b - kappa_inner_unchecked(a, b, kappa) / kappa_inner_unchecked(a, a, kappa) * r_a
    } else {
        r_b
    }
}

/// Returns `(C_{α,β}, C_{β,α})` with `C_{α,β} = ⟨β,α⟩_κ/⟨β,β⟩_κ` and
/// `C_{β,α} = ⟨α,β⟩_κ/⟨α,α⟩_κ`. They enter the invasion rates as
/// `I(β,α) = r_α − C_{α,β} r_β` and `I(α,β) = r_β − C_{β,α} r_α`.
pub fn competitive_effects(
    landscape: &Landscape,
    a: &Strategy,
    b: &Strategy,
) -> Result<(f64, f64)> {
    check(landscape, a)?;
    check(landscape, b)?;
    let kappa = landscape.kappa();
    let (a, b) = (a.alpha(), b.alpha());
    let aa = kappa_inner_unchecked(a, a, kappa);
    let bb = kappa_inner_unchecked(b, b, kappa);
    if aa <= 0.0 || bb <= 0.0 {
        return Err(Error::DegenerateStrategy);
    }
    let ab = kappa_inner_unchecked(a, b, kappa);
    Ok((ab / bb, ab / aa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Coexistence,
    AlphaExcludesBeta,
    BetaExcludesAlpha,
    BothExtinct,
    Boundary,
    Degenerate,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Coexistence => "Coexistence",
            Outcome::AlphaExcludesBeta => "AlphaExcludesBeta",
            Outcome::BetaExcludesAlpha => "BetaExcludesAlpha",
            Outcome::BothExtinct => "BothExtinct",
            Outcome::Boundary => "Boundary",
            Outcome::Degenerate => "Degenerate",
        }
    }

    /// Outcome seen with the roles of the two strategies exchanged.
    pub fn mirrored(self) -> Self {
        match self {
            Outcome::AlphaExcludesBeta => Outcome::BetaExcludesAlpha,
            Outcome::BetaExcludesAlpha => Outcome::AlphaExcludesBeta,
            other => other,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Coexistence" => Outcome::Coexistence,
            "AlphaExcludesBeta" => Outcome::AlphaExcludesBeta,
            "BetaExcludesAlpha" => Outcome::BetaExcludesAlpha,
            "BothExtinct" => Outcome::BothExtinct,
            "Boundary" => Outcome::Boundary,
            "Degenerate" => Outcome::Degenerate,
            other => return Err(Error::ParseError(format!("unknown outcome {other:?}"))),
        })
    }
}

/// Flat record of everything that decides the fate of a strategy pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvasionReport {
    pub r_alpha: f64,
    pub r_beta: f64,
    pub i_ab: f64,
    pub i_ba: f64,
    pub c_ab: f64,
    pub c_ba: f64,
    pub outcome: Outcome,
}

impl InvasionReport {
    pub const CSV_HEADER: [&'static str; 7] = [
        "r_alpha", "r_beta", "i_ab", "i_ba", "c_ab", "c_ba", "outcome",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let mut rec: Vec<String> = [
            self.r_alpha,
            self.r_beta,
            self.i_ab,
            self.i_ba,
            self.c_ab,
            self.c_ba,
        ]
        .iter()
        .map(|&v| crate::format_f64(v))
        .collect();
        rec.push(self.outcome.to_string());
        rec
    }

    pub fn from_csv_record(rec: &[&str]) -> Result<Self> {
        if rec.len() != 7 {
            return Err(Error::ParseError(format!(
                "expected 7 fields, got {}",
                rec.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| Error::ParseError(format!("field {}: {e}", Self::CSV_HEADER[i])))
        };
        Ok(InvasionReport {
            r_alpha: num(0)?,
            r_beta: num(1)?,
            i_ab: num(2)?,
            i_ba: num(3)?,
            c_ab: num(4)?,
            c_ba: num(5)?,
            outcome: rec[6].parse()?,
        })
    }

    /// Same report with `α` and `β` exchanged.
    pub fn mirrored(&self) -> Self {
        InvasionReport {
            r_alpha: self.r_beta,
            r_beta: self.r_alpha,
            i_ab: self.i_ba,
            i_ba: self.i_ab,
            c_ab: self.c_ba,
            c_ba: self.c_ab,
            outcome: self.outcome.mirrored(),
        }
    }
}

/// Computes growth rates, invasion rates and competitive effects for the
/// pair, then classifies the long-run outcome.
///
/// Precedence: `Degenerate` (identical strategies), `BothExtinct` (neither
/// persists alone), `Coexistence` (mutual invasibility), the two exclusion
/// outcomes, and `Boundary` whenever the deciding invasion rate sits inside
/// the `tol_zero` band.
pub fn classify_outcome(
    landscape: &Landscape,
    a: &Strategy,
    b: &Strategy,
    tol_zero: f64,
) -> Result<InvasionReport> {
    check(landscape, a)?;
    check(landscape, b)?;
    let r_alpha = growth_rate_unchecked(landscape, a.alpha());
    let r_beta = growth_rate_unchecked(landscape, b.alpha());
    let i_ab = invasion_rate_unchecked(landscape, a.alpha(), b.alpha());
    let i_ba = invasion_rate_unchecked(landscape, b.alpha(), a.alpha());
    let (c_ab, c_ba) = competitive_effects(landscape, a, b)?;

    let outcome = if a.distance_inf(b) < TOL_DEGENERATE {
        Outcome::Degenerate
    } else if r_alpha <= 0.0 && r_beta <= 0.0 {
        Outcome::BothExtinct
    } else if i_ab > tol_zero && i_ba > tol_zero {
        Outcome::Coexistence
    } else if r_alpha > 0.0 && i_ab < -tol_zero {
        Outcome::AlphaExcludesBeta
    } else if r_beta > 0.0 && i_ba < -tol_zero {
        Outcome::BetaExcludesAlpha
    } else {
        Outcome::Boundary
    };

    Ok(InvasionReport {
        r_alpha,
        r_beta,
        i_ab,
        i_ba,
        c_ab,
        c_ba,
        outcome,
    })
}
