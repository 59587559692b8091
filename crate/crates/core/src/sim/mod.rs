//! Sample paths of the monomorphic, dimorphic, linearised-invader and
//! dispersal-explicit systems.
//!
//! Positivity-constrained equations are integrated in log space
//! ([`Scheme::LogEuler`]); the noise term is then exact for each step. All
//! coupled equations are driven by a single `n`-dimensional Brownian increment
//! mapped through the landscape's noise loading, which reproduces the
//! cross-correlation `α·Σβ` between populations exactly.

mod comparison;
mod models;
mod oracle;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use comparison::{coupled_comparison, ComparisonReport};
pub use models::{
    simulate_dimorphic, simulate_dispersal, simulate_linearized_invasion, simulate_monomorphic,
    LinearizedInvasion,
};
pub use oracle::{
    exact_logistic_on_path, exact_logistic_oracle, log_euler_logistic_on_path, BrownianPath,
};

/// Largest accepted |log increment| in a single step.
pub const LOG_STEP_GUARD: f64 = 10.0;
/// Abundances below this are reported as numerically extinct.
pub const EXTINCTION_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Euler–Maruyama on `log x`.
    LogEuler,
    /// Euler–Maruyama on `x`.
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub replicates: usize,
    pub scheme: Scheme,
    /// Replicate key; together with `seed` it selects the random stream.
    pub stream: u64,
    /// Only every `record_every`-th grid point is stored in the trajectory.
    /// Summary statistics always use the full integration grid.
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_max: 1000.0,
            burn_in: 100.0,
            seed: 42,
            replicates: 8,
            scheme: Scheme::LogEuler,
            stream: 0,
            record_every: 1,
        }
    }
}

impl SimConfig {
    /// Default burn-in is 10% of the horizon.
    pub fn new(dt: f64, t_max: f64) -> Self {
        SimConfig {
            dt,
            t_max,
            burn_in: 0.1 * t_max,
            ..SimConfig::default()
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stream(&self, stream: u64) -> Self {
        SimConfig {
            stream,
            ..self.clone()
        }
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite())
            || !(self.t_max >= self.dt && self.t_max.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt <= t_max, got dt = {}, t_max = {}",
                self.dt, self.t_max
            )));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_max) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= burn_in < t_max, got burn_in = {}",
                self.burn_in
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of integration steps; the effective horizon is `steps() * dt`.
    pub fn steps(&self) -> usize {
        ((self.t_max / self.dt).round() as usize).max(1)
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub(crate) fn burn_steps(&self) -> usize {
        ((self.burn_in / self.dt).round() as usize).min(self.steps() - 1)
    }
}

/// Runs `f` once per replicate (`stream = 0..replicates`) in parallel and
/// returns the results in replicate order.
pub fn run_replicates<T, F>(cfg: &SimConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SimConfig) -> Result<T> + Sync,
{
    cfg.validate()?;
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| f(&cfg.with_stream(r)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub burn_in: f64,
    pub horizon: f64,
    /// Post-burn-in time averages per component.
    pub time_average: Vec<f64>,
    /// `log(x_T / x_0) / T` per component (NaN when undefined).
    pub log_slope: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub final_state: Vec<f64>,
    pub extinct: Vec<bool>,
    /// Post-burn-in average of `x_i / Σ_j x_j` (dispersal runs only).
    pub occupancy_average: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        self.stats.horizon
    }

    /// Values of component `i` at the recorded times.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// CSV with header `t,<labels>`, numbers written with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut rec = vec![crate::format_f64(*t)];
            rec.extend(s.iter().map(|&v| crate::format_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn stats_json(&self) -> String {
        serde_json::to_string_pretty(&self.stats).expect("stats serialise")
    }
}

/// Componentwise observable for [`time_average`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    Identity,
    IndicatorAbove(f64),
    Log,
}

impl Observable {
    fn apply(self, x: f64) -> f64 {
        match self {
            Observable::Identity => x,
            Observable::IndicatorAbove(k) => f64::from(u8::from(x > k)),
            Observable::Log => x.ln(),
        }
    }
}

/// Left Riemann average of `h(x)` over recorded grid points with `t >= burn_in`,
/// one value per component.
pub fn time_average(traj: &Trajectory, h: Observable, burn_in: f64) -> Result<Vec<f64>> {
    let horizon = traj.times.last().copied().unwrap_or(0.0);
    if burn_in >= horizon {
        return Err(Error::BurnInTooLong { burn_in, horizon });
    }
    let first = traj.times.partition_point(|&t| t < burn_in);
    if first + 1 >= traj.states.len() {
        return Err(Error::BurnInTooLong { burn_in, horizon });
    }
    let window = &traj.states[first..traj.states.len() - 1];
    let dim = traj.labels.len();
    let mut acc = vec![0.0; dim];
    for s in window {
        for (a, &x) in acc.iter_mut().zip(s) {
            *a += h.apply(x);
        }
    }
    Ok(acc.into_iter().map(|a| a / window.len() as f64).collect())
}

/// Accumulates the recorded path and running statistics during integration.
pub(crate) struct Recorder {
    dt: f64,
    steps: usize,
    record_every: usize,
    burn_steps: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    sum: Vec<f64>,
    count: usize,
    min: Vec<f64>,
    max: Vec<f64>,
    occupancy: Option<Vec<f64>>,
}

impl Recorder {
    pub(crate) fn new(cfg: &SimConfig, dim: usize, track_occupancy: bool) -> Self {
        let steps = cfg.steps();
        let capacity = steps / cfg.record_every + 1;
        Recorder {
            dt: cfg.dt,
            steps,
            record_every: cfg.record_every,
            burn_steps: cfg.burn_steps(),
            times: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            sum: vec![0.0; dim],
            count: 0,
            min: vec![f64::INFINITY; dim],
            max: vec![f64::NEG_INFINITY; dim],
            occupancy: track_occupancy.then(|| vec![0.0; dim]),
        }
    }

    /// Observe the state at grid index `k` (`0..=steps`).
    #[inline]
    pub(crate) fn observe(&mut self, k: usize, state: &[f64]) {
        if k.is_multiple_of(self.record_every) {
            self.times.push(k as f64 * self.dt);
            self.states.push(state.to_vec());
        }
        for (i, &x) in state.iter().enumerate() {
            self.min[i] = self.min[i].min(x);
            self.max[i] = self.max[i].max(x);
        }
        if k >= self.burn_steps && k < self.steps {
            self.count += 1;
            for (s, &x) in self.sum.iter_mut().zip(state) {
                *s += x;
            }
            if let Some(occ) = self.occupancy.as_mut() {
                let total: f64 = state.iter().sum();
                for (o, &x) in occ.iter_mut().zip(state) {
                    *o += x / total;
                }
            }
        }
    }

    pub(crate) fn finish(
        self,
        labels: Vec<String>,
        final_state: Vec<f64>,
        log_slope: Vec<f64>,
    ) -> Trajectory {
        let horizon = self.steps as f64 * self.dt;
        let count = self.count.max(1) as f64;
        let stats = TrajectoryStats {
            burn_in: self.burn_steps as f64 * self.dt,
            horizon,
            time_average: self.sum.iter().map(|s| s / count).collect(),
            log_slope,
            min: self.min,
            max: self.max,
            extinct: final_state
                .iter()
                .map(|&x| x < EXTINCTION_THRESHOLD)
                .collect(),
            final_state,
            occupancy_average: self
                .occupancy
                .map(|o| o.into_iter().map(|v| v / count).collect()),
        };
        Trajectory {
            labels,
            times: self.times,
            states: self.states,
            stats,
        }
    }
}

/// `(log x_T − log x_0)/T` per component; NaN where `x_0 = 0`.
pub(crate) fn log_slopes(log_start: &[f64], log_end: &[f64], horizon: f64) -> Vec<f64> {
    log_start
        .iter()
        .zip(log_end)
        .map(|(a, b)| {
            if a.is_finite() {
                (b - a) / horizon
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_traj(c: f64, points: usize) -> Trajectory {
        let cfg = SimConfig::new(0.5, (points - 1) as f64 * 0.5).with_burn_in(0.0);
        let mut rec = Recorder::new(&cfg, 1, false);
        for k in 0..points {
            rec.observe(k, &[c]);
        }
        rec.finish(
            vec!["x".into()],
            vec![c],
            log_slopes(&[c.ln()], &[c.ln()], 5.0),
        )
    }

    #[test]
    fn time_average_of_constant() {
        let t = constant_traj(2.5, 11);
        assert_eq!(
            time_average(&t, Observable::Identity, 0.0).unwrap(),
            vec![2.5]
        );
        assert_eq!(
            time_average(&t, Observable::Identity, 2.0).unwrap(),
            vec![2.5]
        );
        assert_eq!(
            time_average(&t, Observable::IndicatorAbove(2.0), 0.0).unwrap(),
            vec![1.0]
        );
        assert!((time_average(&t, Observable::Log, 0.0).unwrap()[0] - 2.5f64.ln()).abs() < 1e-15);
        assert_eq!(t.stats.time_average, vec![2.5]);
        assert_eq!(t.stats.log_slope, vec![0.0]);
    }

    #[test]
    fn burn_in_too_long() {
        let t = constant_traj(1.0, 11);
        assert!(matches!(
            time_average(&t, Observable::Identity, 5.0),
            Err(Error::BurnInTooLong { .. })
        ));
        assert!(time_average(&t, Observable::Identity, 6.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(1e-3, 10.0).validate().is_ok());
        assert!(SimConfig::new(0.0, 10.0).validate().is_err());
        assert!(SimConfig::new(1.0, 0.5).validate().is_err());
        assert!(SimConfig::new(1e-3, 10.0)
            .with_burn_in(10.0)
            .validate()
            .is_err());
        assert!(SimConfig::new(1e-3, 10.0)
            .with_replicates(0)
            .validate()
            .is_err());
        assert_eq!(SimConfig::new(1e-3, 10.0).steps(), 10_000);
        assert_eq!(SimConfig::new(1e-3, 10.0).burn_in, 1.0);
    }

    #[test]
    fn std_error() {
        let (m, se) = mean_and_std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
