//! Closed-form solution of the single-patch stochastic logistic equation
//! `dZ = Z(μ − κZ) dt + σ Z dW`, evaluated along a sampled Brownian path:
//!
//! `Z_t = z0 e^{A_t} / (1 + z0 κ ∫₀ᵗ e^{A_s} ds)`, `A_t = (μ − σ²/2) t + σ W_t`.
//!
//! Everything is done in logs so long horizons neither overflow nor underflow.

use crate::error::{Error, Result};
use crate::rng::NoiseStream;

use super::{log_slopes, Recorder, SimConfig, Trajectory, LOG_STEP_GUARD};

/// Brownian increments on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl BrownianPath {
    /// The same increments a one-patch simulation with this `(seed, stream, dt)` consumes.
    pub fn sample(seed: u64, stream: u64, dt: f64, steps: usize) -> Self {
        let mut noise = NoiseStream::new(seed, stream, dt);
        let mut increments = vec![0.0; steps];
        for db in increments.chunks_mut(1) {
            noise.fill(db);
        }
        BrownianPath { dt, increments }
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    /// Sums consecutive blocks of `factor` increments; a trailing partial block is dropped.
    pub fn coarsen(&self, factor: usize) -> Self {
        assert!(factor >= 1, "coarsening factor must be positive");
        BrownianPath {
            dt: self.dt * factor as f64,
            increments: self
                .increments
                .chunks_exact(factor)
                .map(|c| c.iter().sum())
                .collect(),
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn check_params(kappa: f64, sigma2: f64, z0: f64) -> Result<()> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::NonPositiveInitial { value: z0 });
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sigma2 must be >= 0, got {sigma2}"
        )));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::NonPositiveKappa {
            index: 0,
            value: kappa,
        });
    }
    Ok(())
}

/// `log Z` at every grid point of `path` (length `steps + 1`), integral by trapezoid rule.
pub fn exact_logistic_on_path(
    mu: f64,
    kappa: f64,
    sigma2: f64,
    z0: f64,
    path: &BrownianPath,
) -> Result<Vec<f64>> {
    check_params(kappa, sigma2, z0)?;
    let sigma = sigma2.sqrt();
    let drift = mu - sigma2 / 2.0;
    let dt = path.dt;
    let log_z0 = z0.ln();
    let log_z0k = log_z0 + kappa.ln();
    let log_half_dt = (dt / 2.0).ln();

    let mut out = Vec::with_capacity(path.steps() + 1);
    out.push(log_z0);
    let (mut w, mut a) = (0.0, 0.0);
    let mut log_int = f64::NEG_INFINITY;
    for (k, db) in path.increments.iter().enumerate() {
        w += db;
        let a_next = drift * (k + 1) as f64 * dt + sigma * w;
        log_int = log_add_exp(log_int, log_half_dt + log_add_exp(a, a_next));
        a = a_next;
        // log(1 + z0 κ I) = softplus(log z0κ + log I)
        out.push(log_z0 + a - log_add_exp(0.0, log_z0k + log_int));
    }
    Ok(out)
}

/// `log Z` from log-space Euler–Maruyama driven by the increments of `path`.
pub fn log_euler_logistic_on_path(
    mu: f64,
    kappa: f64,
    sigma2: f64,
    z0: f64,
    path: &BrownianPath,
) -> Result<Vec<f64>> {
    check_params(kappa, sigma2, z0)?;
    let sigma = sigma2.sqrt();
    let dt = path.dt;
    let mut log_z = z0.ln();
    let mut out = Vec::with_capacity(path.steps() + 1);
    out.push(log_z);
    for (k, db) in path.increments.iter().enumerate() {
        let inc = (mu - kappa * log_z.exp() - sigma2 / 2.0) * dt + sigma * db;
        if !(inc.abs() <= LOG_STEP_GUARD) {
            return Err(Error::UnstableStep {
                time: (k + 1) as f64 * dt,
                component: 0,
            });
        }
        log_z += inc;
        out.push(log_z);
    }
    Ok(out)
}

/// Closed-form trajectory on the Brownian path keyed by `(cfg.seed, cfg.stream)`.
/// A one-patch [`super::simulate_monomorphic`] run with the same config sees the same path.
pub fn exact_logistic_oracle(
    mu: f64,
    kappa: f64,
    sigma2: f64,
    z0: f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let path = BrownianPath::sample(cfg.seed, cfg.stream, cfg.dt, cfg.steps());
    let log_z = exact_logistic_on_path(mu, kappa, sigma2, z0, &path)?;
    let mut rec = Recorder::new(cfg, 1, false);
    for (k, lz) in log_z.iter().enumerate() {
        rec.observe(k, &[lz.exp()]);
    }
    let last = *log_z.last().expect("non-empty path");
    let slopes = log_slopes(&[log_z[0]], &[last], cfg.horizon());
    Ok(rec.finish(vec!["z".into()], vec![last.exp()], slopes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{Landscape, Strategy};
    use crate::sim::simulate_monomorphic;

    #[test]
    fn deterministic_limit_reaches_capacity() {
        let t = exact_logistic_oracle(1.0, 1.0, 1e-8, 0.1, &SimConfig::new(1e-3, 20.0)).unwrap();
        assert!(
            (t.stats.final_state[0] - 1.0).abs() < 1e-3,
            "{}",
            t.stats.final_state[0]
        );
    }

    #[test]
    fn fixed_point_is_constant() {
        // Only the trapezoid error, O((μ dt)²), separates this from z0.
        let t = exact_logistic_oracle(2.0, 4.0, 0.0, 0.5, &SimConfig::new(1e-3, 10.0)).unwrap();
        assert!(t.states.iter().all(|s| (s[0] - 0.5).abs() < 1e-6));
    }

    #[test]
    fn matches_deterministic_logistic() {
        // z(t) = z0 e^{μt} / (1 + z0 κ (e^{μt} − 1)/μ)
        let (mu, kappa, z0) = (0.7, 2.0, 0.05);
        let cfg = SimConfig::new(1e-3, 10.0);
        let t = exact_logistic_oracle(mu, kappa, 0.0, z0, &cfg).unwrap();
        for (time, s) in t.times.iter().zip(&t.states) {
            let e = (mu * time).exp();
            let exact = z0 * e / (1.0 + z0 * kappa * (e - 1.0) / mu);
            assert!((s[0] / exact - 1.0).abs() < 1e-6, "{time}");
        }
    }

    #[test]
    fn closed_form_satisfies_the_sde() {
        // Itô: d log Z = (μ − σ²/2 − κZ) dt + σ dW. Check the increments of the
        // closed form against this drift on a fine grid. Putting μ/κ instead of κ
        // in front of the integral would fail here, since μ ≠ κ².
        let (mu, kappa, sigma2, z0) = (1.5, 0.5, 0.8, 0.3);
        let path = BrownianPath::sample(4, 0, 1e-5, 200_000);
        let log_z = exact_logistic_on_path(mu, kappa, sigma2, z0, &path).unwrap();
        let sigma = sigma2.sqrt();
        let mut worst: f64 = 0.0;
        for k in 0..path.steps() {
            let z_mid = ((log_z[k].exp()) + log_z[k + 1].exp()) / 2.0;
            let predicted =
                (mu - sigma2 / 2.0 - kappa * z_mid) * path.dt + sigma * path.increments[k];
            worst = worst.max((log_z[k + 1] - log_z[k] - predicted).abs());
        }
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn shares_path_with_monomorphic() {
        let cfg = SimConfig::new(1e-4, 1.0).with_seed(8);
        let l = Landscape::symmetric(1, 1.0, 1.0, 1.0).unwrap();
        let sim = simulate_monomorphic(&l, &Strategy::vertex(1, 0).unwrap(), 0.5, &cfg).unwrap();
        let path = BrownianPath::sample(8, 0, 1e-4, cfg.steps());
        let euler = log_euler_logistic_on_path(1.0, 1.0, 1.0, 0.5, &path).unwrap();
        for (s, e) in sim.states.iter().zip(&euler) {
            assert!((s[0].ln() - e).abs() < 1e-12);
        }
    }

    #[test]
    fn coarsen_preserves_endpoint() {
        let fine = BrownianPath::sample(1, 0, 0.01, 100);
        let coarse = fine.coarsen(10);
        assert_eq!(coarse.steps(), 10);
        assert!((coarse.dt - 0.1).abs() < 1e-15);
        let wf: f64 = fine.increments.iter().sum();
        let wc: f64 = coarse.increments.iter().sum();
        assert!((wf - wc).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_initial() {
        assert!(matches!(
            exact_logistic_oracle(1.0, 1.0, 1.0, 0.0, &SimConfig::new(0.1, 1.0)),
            Err(Error::NonPositiveInitial { .. })
        ));
    }
}
