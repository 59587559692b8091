use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{kappa_inner_unchecked, Landscape, Strategy};
use crate::rng::NoiseStream;

use super::models::{advance, Morph};
use super::{Scheme, SimConfig};

/// Largest accepted `dt · max(⟨α,α⟩_κ, ⟨β,β⟩_κ)`.
pub const COMPARISON_STEP_FACTOR: f64 = 1e-3;

/// Result of [`coupled_comparison`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Fraction of grid points with `X ≤ X̄` and `Y ≤ Ȳ`.
    pub fraction: f64,
    pub grid_points: usize,
    /// Steps where `dt·⟨α,α⟩_κ·X̄ > 1` or `dt·⟨β,β⟩_κ·Ȳ > 1`. Discrete
    /// domination is only guaranteed when this is zero.
    pub step_condition_violations: usize,
    pub dt_bound: f64,
    /// Largest `|log X̄ − log X|` over the grid.
    pub max_log_gap_x: f64,
}

/// Runs the competing pair `(X, Y)` next to the decoupled logistic pair
/// `(X̄, Ȳ)` on the same noise increments (log-space Euler) and reports how
/// often the competitors stay below their decoupled counterparts.
pub fn coupled_comparison(
    landscape: &Landscape,
    a: &Strategy,
    b: &Strategy,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
) -> Result<ComparisonReport> {
    comparison_with_cross_scale(landscape, a, b, x0, y0, cfg, 1.0)
}

/// As [`coupled_comparison`] with the cross-competition coefficient scaled by
/// `cross_scale`. With `cross_scale = 0` the two systems coincide exactly.
pub(crate) fn comparison_with_cross_scale(
    landscape: &Landscape,
    a: &Strategy,
    b: &Strategy,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
    cross_scale: f64,
) -> Result<ComparisonReport> {
    landscape.check_len("strategy", a.len())?;
    landscape.check_len("strategy", b.len())?;
    cfg.validate()?;
    for v in [x0, y0] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveInitial { value: v });
        }
    }
    let kappa = landscape.kappa();
    let (alpha, beta) = (a.alpha(), b.alpha());
    let qa = kappa_inner_unchecked(alpha, alpha, kappa);
    let qb = kappa_inner_unchecked(beta, beta, kappa);
    let qab = cross_scale * kappa_inner_unchecked(alpha, beta, kappa);
    let dt_bound = COMPARISON_STEP_FACTOR / qa.max(qb);
    if cfg.dt > dt_bound {
        return Err(Error::ComparisonStepTooLarge {
            dt: cfg.dt,
            bound: dt_bound,
        });
    }
    let mx = Morph::new(landscape, alpha);
    let my = Morph::new(landscape, beta);

    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut noise = NoiseStream::new(cfg.seed, cfg.stream, dt);
    let mut db = vec![0.0; landscape.n()];
    let (mut x, mut lx) = (x0, x0.ln());
    let (mut y, mut ly) = (y0, y0.ln());
    let (mut xb, mut lxb) = (x0, x0.ln());
    let (mut yb, mut lyb) = (y0, y0.ln());
    let mut dominated = 1usize;
    let mut violations = 0usize;
    let mut gap: f64 = 0.0;
    for k in 1..=steps {
        noise.fill(&mut db);
        if dt * qa * xb > 1.0 || dt * qb * yb > 1.0 {
            violations += 1;
        }
        let (nx, ny) = (mx.noise(&db), my.noise(&db));
        let px = mx.growth - qa * x - qab * y;
        let py = my.growth - qab * x - qb * y;
        let pxb = mx.growth - qa * xb;
        let pyb = my.growth - qb * yb;
        let ok = advance(Scheme::LogEuler, &mut x, &mut lx, px, mx.half_var, nx, dt)
            && advance(Scheme::LogEuler, &mut y, &mut ly, py, my.half_var, ny, dt)
            && advance(
                Scheme::LogEuler,
                &mut xb,
                &mut lxb,
                pxb,
                mx.half_var,
                nx,
                dt,
            )
            && advance(
                Scheme::LogEuler,
                &mut yb,
                &mut lyb,
                pyb,
                my.half_var,
                ny,
                dt,
            );
        if !ok {
            return Err(Error::UnstableStep {
                time: k as f64 * dt,
                component: 0,
            });
        }
        gap = gap.max((lxb - lx).abs());
        if lx <= lxb && ly <= lyb {
            dominated += 1;
        }
    }
    Ok(ComparisonReport {
        fraction: dominated as f64 / (steps + 1) as f64,
        grid_points: steps + 1,
        step_condition_violations: violations,
        dt_bound,
        max_log_gap_x: gap,
    })
}
