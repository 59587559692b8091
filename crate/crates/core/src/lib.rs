//! Habitat selection in stochastic, spatially heterogeneous environments.
//!
//! A population spreads its members over `n` patches according to a strategy
//! `α` on the simplex. Patch `i` has intrinsic growth `μ_i`, competition
//! strength `κ_i`, and environmental noise with covariance `Σ`. This crate
//! computes stochastic growth and invasion rates, classifies pairwise
//! outcomes, simulates the underlying stochastic differential equations,
//! and solves for evolutionarily stable patch-selection strategies.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod ess;
pub mod landscape;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod sweep;

pub use analytic::{
    classify_outcome, competitive_effects, invasion_rate, mean_abundance, stationary_gamma,
    stochastic_growth_rate, GammaStationary, InvasionReport, Outcome, TOL_DEGENERATE, TOL_ZERO,
};
pub use error::{Error, Result};
pub use ess::{
    deterministic_limit_ess, ess_residual, pure_ess_check, solve_ess, verify_ess, Certificate,
    EssKind, EssOptions, EssResidual, EssResult,
};
pub use landscape::{
    dispersal_stationary, kappa_inner, DispersalMatrix, Landscape, LandscapeFile, Strategy,
};
pub use sim::{
    coupled_comparison, exact_logistic_oracle, simulate_dimorphic, simulate_dispersal,
    simulate_linearized_invasion, simulate_monomorphic, time_average, ComparisonReport,
    LinearizedInvasion, Observable, Scheme, SimConfig, Trajectory,
};

/// Environment variable that overrides the default seed.
pub const SEED_ENV: &str = "PATCHSEL_SEED";

/// Decimal representation with 17 significant digits; parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Default seed, honouring [`SEED_ENV`] when it holds a valid integer.
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(42)
}
