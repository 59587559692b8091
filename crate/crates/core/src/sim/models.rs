use crate::error::{Error, Result};
use crate::landscape::{dot, kappa_inner_unchecked, DispersalMatrix, Landscape, Strategy};
use crate::rng::NoiseStream;

use super::{
    log_slopes, mean_and_std_error, run_replicates, Recorder, Scheme, SimConfig, Trajectory,
    LOG_STEP_GUARD,
};

/// Per-strategy constants of the log-space drift and the noise loading.
pub(super) struct Morph {
    /// `α·μ`
    pub growth: f64,
    /// `α·Σα / 2`
    pub half_var: f64,
    /// `Lᵀα`, so the noise increment is `load · ΔB`.
    pub load: Vec<f64>,
}

impl Morph {
    pub(super) fn new(landscape: &Landscape, a: &[f64]) -> Self {
        Morph {
            growth: dot(a, landscape.mu()),
            half_var: landscape.sigma_form(a, a) / 2.0,
            load: landscape.loading_for(a),
        }
    }

    #[inline]
    pub(super) fn noise(&self, db: &[f64]) -> f64 {
        dot(&self.load, db)
    }
}

/// Advances one positive component by one step. `per_capita` is the
/// arithmetic per-capita drift (without the Itô correction).
#[inline]
pub(super) fn advance(
    scheme: Scheme,
    x: &mut f64,
    log_x: &mut f64,
    per_capita: f64,
    half_var: f64,
    noise: f64,
    dt: f64,
) -> bool {
    match scheme {
        Scheme::LogEuler => {
            let inc = (per_capita - half_var) * dt + noise;
            if !(inc.abs() <= LOG_STEP_GUARD) {
                return false;
            }
            *log_x += inc;
            *x = log_x.exp();
        }
        Scheme::Euler => {
            let next = *x + *x * per_capita * dt + *x * noise;
            if !(next > 0.0 && next.is_finite()) {
                return false;
            }
            *x = next;
            *log_x = next.ln();
        }
    }
    true
}

fn check_positive(value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::NonPositiveInitial { value });
    }
    Ok(())
}

/// Total abundance of a single population playing `a`.
pub fn simulate_monomorphic(
    landscape: &Landscape,
    a: &Strategy,
    x0: f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    landscape.check_len("strategy", a.len())?;
    cfg.validate()?;
    check_positive(x0)?;
    let alpha = a.alpha();
    let morph = Morph::new(landscape, alpha);
    let q = kappa_inner_unchecked(alpha, alpha, landscape.kappa());

    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut noise = NoiseStream::new(cfg.seed, cfg.stream, dt);
    let mut db = vec![0.0; landscape.n()];
    let mut rec = Recorder::new(cfg, 1, false);
    let (mut x, mut log_x) = (x0, x0.ln());
    let log_x0 = log_x;
    rec.observe(0, &[x]);
    for k in 1..=steps {
        noise.fill(&mut db);
        let per_capita = morph.growth - q * x;
        if !advance(
            cfg.scheme,
            &mut x,
            &mut log_x,
            per_capita,
            morph.half_var,
            morph.noise(&db),
            dt,
        ) {
            return Err(Error::UnstableStep {
                time: k as f64 * dt,
                component: 0,
            });
        }
        rec.observe(k, &[x]);
    }
    let slopes = log_slopes(&[log_x0], &[log_x], cfg.horizon());
    Ok(rec.finish(vec!["x".into()], vec![x], slopes))
}

/// Two populations playing `a` and `b`, competing through `⟨α,β⟩_κ`.
///
/// With `y0 = 0` the second population is identically zero and the first
/// follows exactly the path of [`simulate_monomorphic`] under the same seed.
pub fn simulate_dimorphic(
    landscape: &Landscape,
    a: &Strategy,
    b: &Strategy,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    landscape.check_len("strategy", a.len())?;
    landscape.check_len("strategy", b.len())?;
    cfg.validate()?;
    check_positive(x0)?;
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::NonPositiveInitial { value: y0 });
    }
    let kappa = landscape.kappa();
    let (alpha, beta) = (a.alpha(), b.alpha());
    let mx = Morph::new(landscape, alpha);
    let my = Morph::new(landscape, beta);
    let qa = kappa_inner_unchecked(alpha, alpha, kappa);
    let qb = kappa_inner_unchecked(beta, beta, kappa);
    let qab = kappa_inner_unchecked(alpha, beta, kappa);
    let y_present = y0 > 0.0;

    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut noise = NoiseStream::new(cfg.seed, cfg.stream, dt);
    let mut db = vec![0.0; landscape.n()];
    let mut rec = Recorder::new(cfg, 2, false);
    let (mut x, mut log_x) = (x0, x0.ln());
    let (mut y, mut log_y) = (y0, y0.ln());
    let start = [log_x, log_y];
    rec.observe(0, &[x, y]);
    for k in 1..=steps {
        noise.fill(&mut db);
        let px = mx.growth - qa * x - qab * y;
        let py = my.growth - qab * x - qb * y;
        if !advance(
            cfg.scheme,
            &mut x,
            &mut log_x,
            px,
            mx.half_var,
            mx.noise(&db),
            dt,
        ) {
            return Err(Error::UnstableStep {
                time: k as f64 * dt,
                component: 0,
            });
        }
        if y_present
            && !advance(
                cfg.scheme,
                &mut y,
                &mut log_y,
                py,
                my.half_var,
                my.noise(&db),
                dt,
            )
        {
            return Err(Error::UnstableStep {
                time: k as f64 * dt,
                component: 1,
            });
        }
        rec.observe(k, &[x, y]);
    }
    let slopes = log_slopes(&start, &[log_x, log_y], cfg.horizon());
    Ok(rec.finish(vec!["x".into(), "y".into()], vec![x, y], slopes))
}

/// Result of [`simulate_linearized_invasion`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedInvasion {
    /// Replicate 0; components are `x` (resident) and `log_y` (invader, in logs).
    pub trajectory: Trajectory,
    /// Replicate mean of the invader's post-burn-in log-slope.
    pub slope: f64,
    pub std_error: f64,
    pub slopes: Vec<f64>,
}

/// Resident at full nonlinearity, invader without self-limitation.
///
/// Each replicate's slope is `(log ŷ_T − log ŷ_{burn_in}) / (T − burn_in)`;
/// with zero burn-in this is `log(ŷ_T/ŷ_0)/T`. The invader is tracked in log
/// space only, so neither explosive nor vanishing invaders overflow.
pub fn simulate_linearized_invasion(
    landscape: &Landscape,
    resident: &Strategy,
    invader: &Strategy,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
) -> Result<LinearizedInvasion> {
    landscape.check_len("strategy", resident.len())?;
    landscape.check_len("strategy", invader.len())?;
    check_positive(x0)?;
    check_positive(y0)?;
    let runs = run_replicates(cfg, |c| {
        linearized_run(landscape, resident, invader, x0, y0, c)
    })?;
    let slopes: Vec<f64> = runs.iter().map(|(_, s)| *s).collect();
    let (slope, std_error) = mean_and_std_error(&slopes);
    let trajectory = runs.into_iter().next().expect("at least one replicate").0;
    Ok(LinearizedInvasion {
        trajectory,
        slope,
        std_error,
        slopes,
    })
}

fn linearized_run(
    landscape: &Landscape,
    resident: &Strategy,
    invader: &Strategy,
    x0: f64,
    y0: f64,
    cfg: &SimConfig,
) -> Result<(Trajectory, f64)> {
    let kappa = landscape.kappa();
    let (alpha, beta) = (resident.alpha(), invader.alpha());
    let mx = Morph::new(landscape, alpha);
    let my = Morph::new(landscape, beta);
    let qa = kappa_inner_unchecked(alpha, alpha, kappa);
    let qab = kappa_inner_unchecked(alpha, beta, kappa);

    let steps = cfg.steps();
    let burn = cfg.burn_steps();
    let dt = cfg.dt;
    let mut noise = NoiseStream::new(cfg.seed, cfg.stream, dt);
    let mut db = vec![0.0; landscape.n()];
    let mut rec = Recorder::new(cfg, 2, false);
    let (mut x, mut log_x) = (x0, x0.ln());
    let log_x0 = log_x;
    let mut log_y = y0.ln();
    let mut log_y_burn = log_y;
    rec.observe(0, &[x, log_y]);
    for k in 1..=steps {
        noise.fill(&mut db);
        let py = my.growth - qab * x;
        let inc_y = (py - my.half_var) * dt + my.noise(&db);
        let px = mx.growth - qa * x;
        if !advance(
            cfg.scheme,
            &mut x,
            &mut log_x,
            px,
            mx.half_var,
            mx.noise(&db),
            dt,
        ) {
            return Err(Error::UnstableStep {
                time: k as f64 * dt,
                component: 0,
            });
        }
        if !(inc_y.abs() <= LOG_STEP_GUARD) {
            return Err(Error::UnstableStep {
                time: k as f64 * dt,
                component: 1,
            });
        }
        log_y += inc_y;
        if k == burn {
            log_y_burn = log_y;
        }
        rec.observe(k, &[x, log_y]);
    }
    let window = (steps - burn) as f64 * dt;
    let slope = (log_y - log_y_burn) / window;
    let slopes = vec![(log_x - log_x0) / cfg.horizon(), slope];
    Ok((
        rec.finish(vec!["x".into(), "log_y".into()], vec![x, log_y], slopes),
        slope,
    ))
}

/// Patch abundances with explicit dispersal at rates `δ d_ij`, integrated with
/// arithmetic Euler–Maruyama. A step that would leave the positive orthant
/// fails with `UnstableStep`; nothing is clamped.
pub fn simulate_dispersal(
    landscape: &Landscape,
    dispersal: &DispersalMatrix,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Trajectory> {
    let n = landscape.n();
    landscape.check_len("dispersal matrix", dispersal.n())?;
    landscape.check_len("initial state", x0.len())?;
    cfg.validate()?;
    for &v in x0 {
        check_positive(v)?;
    }
    let mu = landscape.mu();
    let kappa = landscape.kappa();
    let d = dispersal.rates();
    let delta = dispersal.delta();
    let loading = landscape.noise_loading();

    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut noise = NoiseStream::new(cfg.seed, cfg.stream, dt);
    let mut db = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut rec = Recorder::new(cfg, n, true);
    rec.observe(0, &x);
    for k in 1..=steps {
        noise.fill(&mut db);
        for (i, ei) in e.iter_mut().enumerate() {
            *ei = (0..n).fold(0.0, |acc, j| acc + loading[(i, j)] * db[j]);
        }
        for i in 0..n {
            let per_capita = mu[i] - kappa[i] * x[i];
            let inflow = (0..n).fold(0.0, |acc, j| acc + x[j] * d[(j, i)]);
            let transfer = delta * inflow * dt;
            let xi = x[i];
            next[i] = xi + xi * per_capita * dt + transfer + xi * e[i];
            if !(next[i] > 0.0 && next[i].is_finite()) {
                return Err(Error::UnstableStep {
                    time: k as f64 * dt,
                    component: i,
                });
            }
        }
        std::mem::swap(&mut x, &mut next);
        rec.observe(k, &x);
    }
    let start: Vec<f64> = x0.iter().map(|v| v.ln()).collect();
    let end: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let slopes = log_slopes(&start, &end, cfg.horizon());
    let labels = (1..=n).map(|i| format!("x{i}")).collect();
    Ok(rec.finish(labels, x, slopes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{invasion_rate, stationary_gamma};

    fn s(v: &[f64]) -> Strategy {
        Strategy::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_positive_initial() {
        let l = Landscape::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig::new(1e-2, 1.0);
        assert_eq!(
            simulate_monomorphic(&l, &s(&[0.5, 0.5]), 0.0, &cfg).unwrap_err(),
            Error::NonPositiveInitial { value: 0.0 }
        );
        assert!(simulate_dimorphic(&l, &s(&[0.5, 0.5]), &s(&[1.0, 0.0]), -1.0, 1.0, &cfg).is_err());
        assert!(simulate_dimorphic(&l, &s(&[0.5, 0.5]), &s(&[1.0, 0.0]), 1.0, -1.0, &cfg).is_err());
        assert!(
            simulate_linearized_invasion(&l, &s(&[0.5, 0.5]), &s(&[1.0, 0.0]), 1.0, 0.0, &cfg)
                .is_err()
        );
        let d = DispersalMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], 1.0).unwrap();
        assert!(simulate_dispersal(&l, &d, &[1.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn unstable_step_detected() {
        let l = Landscape::symmetric(1, 1.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig::new(1.0, 10.0);
        let err = simulate_monomorphic(&l, &s(&[1.0]), 1e6, &cfg).unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }), "{err:?}");
        let err =
            simulate_monomorphic(&l, &s(&[1.0]), 1e6, &cfg.clone().with_scheme(Scheme::Euler))
                .unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }), "{err:?}");
    }

    #[test]
    fn log_euler_stays_positive() {
        let l = Landscape::symmetric(2, 0.2, 1.0, 3.0).unwrap();
        let cfg = SimConfig::new(1e-2, 200.0);
        let t = simulate_monomorphic(&l, &s(&[0.9, 0.1]), 1e-3, &cfg).unwrap();
        assert!(t.states.iter().all(|st| st[0] > 0.0));
        assert!(t
            .times
            .windows(2)
            .all(|w| (w[1] - w[0] - 1e-2).abs() < 1e-12));
    }

    #[test]
    fn dimorphic_with_absent_invader_matches_monomorphic() {
        let l = Landscape::new(
            2,
            vec![1.0, 0.7],
            vec![1.0, 2.0],
            vec![vec![1.0, 0.3], vec![0.3, 0.5]],
        )
        .unwrap();
        let cfg = SimConfig::new(1e-3, 20.0).with_seed(11);
        let a = s(&[0.4, 0.6]);
        let mono = simulate_monomorphic(&l, &a, 0.8, &cfg).unwrap();
        let di = simulate_dimorphic(&l, &a, &s(&[1.0, 0.0]), 0.8, 0.0, &cfg).unwrap();
        assert_eq!(mono.component(0), di.component(0));
        assert!(di.component(1).iter().all(|&y| y == 0.0));
    }

    #[test]
    fn dispersal_single_patch_matches_monomorphic_euler() {
        let l = Landscape::symmetric(1, 1.0, 1.5, 0.8).unwrap();
        let cfg = SimConfig::new(1e-3, 20.0)
            .with_seed(3)
            .with_scheme(Scheme::Euler);
        let mono = simulate_monomorphic(&l, &s(&[1.0]), 0.5, &cfg).unwrap();
        let d = DispersalMatrix::new(vec![vec![0.0]], 5.0).unwrap();
        let disp = simulate_dispersal(&l, &d, &[0.5], &cfg).unwrap();
        assert_eq!(mono.component(0), disp.component(0));
    }

    #[test]
    fn deterministic_monomorphic_reaches_carrying_capacity() {
        let l = Landscape::uncorrelated(vec![2.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let a = s(&[0.5, 0.5]);
        let t = simulate_monomorphic(&l, &a, 0.1, &SimConfig::new(1e-3, 50.0)).unwrap();
        // α·μ / ⟨α,α⟩_κ = 1.5 / 0.5
        assert!((t.stats.final_state[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn correlation_of_driving_noise() {
        // Increments of log X and log Y minus drift are (Lᵀα)·ΔB and (Lᵀβ)·ΔB.
        let l = Landscape::new(
            3,
            vec![1.0; 3],
            vec![1.0; 3],
            vec![
                vec![1.0, 0.4, -0.2],
                vec![0.4, 0.8, 0.1],
                vec![-0.2, 0.1, 0.6],
            ],
        )
        .unwrap();
        let (a, b) = (s(&[0.6, 0.3, 0.1]), s(&[0.1, 0.2, 0.7]));
        let ma = Morph::new(&l, a.alpha());
        let mb = Morph::new(&l, b.alpha());
        let mut stream = NoiseStream::new(9, 0, 1.0);
        let mut db = vec![0.0; 3];
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..1_000_000 {
            stream.fill(&mut db);
            let (u, v) = (ma.noise(&db), mb.noise(&db));
            sxy += u * v;
            sxx += u * u;
            syy += v * v;
        }
        let sample = sxy / (sxx * syy).sqrt();
        let exact = l.sigma_form(a.alpha(), b.alpha())
            / (l.sigma_form(a.alpha(), a.alpha()) * l.sigma_form(b.alpha(), b.alpha())).sqrt();
        assert!((sample - exact).abs() < 0.01, "{sample} vs {exact}");
    }

    #[test]
    fn sink_extinction_rate() {
        let l = Landscape::uncorrelated(vec![0.2, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let cfg = SimConfig::new(1e-3, 2000.0).with_seed(5);
        let t = simulate_monomorphic(&l, &s(&[1.0, 0.0]), 1.0, &cfg).unwrap();
        assert!(
            (t.stats.log_slope[0] + 0.3).abs() < 0.03,
            "{}",
            t.stats.log_slope[0]
        );
        assert!(t.stats.extinct[0]);
    }

    #[test]
    fn symmetric_time_average() {
        let l = Landscape::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let a = s(&[0.5, 0.5]);
        let cfg = SimConfig::new(1e-3, 5000.0)
            .with_burn_in(500.0)
            .with_record_every(100);
        let t = simulate_monomorphic(&l, &a, 1.0, &cfg).unwrap();
        let mean = stationary_gamma(&l, &a).unwrap().mean;
        assert!(
            (t.stats.time_average[0] - mean).abs() < 0.05,
            "{}",
            t.stats.time_average[0]
        );
        let recorded =
            super::super::time_average(&t, super::super::Observable::Identity, 500.0).unwrap();
        assert!((recorded[0] - mean).abs() < 0.05, "{}", recorded[0]);
    }

    #[test]
    fn linearized_slope_edge_cases() {
        let l = Landscape::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let a = s(&[0.3, 0.7]);
        let cfg = SimConfig::new(1e-3, 300.0)
            .with_burn_in(30.0)
            .with_replicates(8)
            .with_record_every(1000);
        let est = simulate_linearized_invasion(&l, &a, &a, 0.7, 1.0, &cfg).unwrap();
        assert!(
            est.slope.abs() < 3.0 * est.std_error + 0.01,
            "{} ± {}",
            est.slope,
            est.std_error
        );

        let sink = Landscape::uncorrelated(vec![0.2, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let (ra, rb) = (s(&[1.0, 0.0]), s(&[0.0, 1.0]));
        let est = simulate_linearized_invasion(&sink, &ra, &rb, 1.0, 1.0, &cfg).unwrap();
        let expected = invasion_rate(&sink, &ra, &rb).unwrap();
        assert_eq!(expected, 1.0);
        // The resident decays, so after burn-in the invader grows at r_β up to O(X̄).
        assert!((est.slope - expected).abs() < 0.01, "{}", est.slope);
    }

    #[test]
    fn dispersal_isolated_sink_declines() {
        let l = Landscape::uncorrelated(vec![0.2, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let d = DispersalMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], 0.0).unwrap();
        let cfg = SimConfig::new(1e-3, 100.0)
            .with_seed(2)
            .with_record_every(1000);
        let t = simulate_dispersal(&l, &d, &[1.0, 1.0], &cfg).unwrap();
        assert!(
            (t.stats.log_slope[0] + 0.3).abs() < 0.15,
            "{}",
            t.stats.log_slope[0]
        );
    }

    #[test]
    fn trajectories_are_reproducible() {
        let l = Landscape::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig::new(1e-2, 50.0).with_seed(99).with_replicates(6);
        let one = run_replicates(&cfg, |c| {
            simulate_dimorphic(&l, &s(&[0.3, 0.7]), &s(&[0.7, 0.3]), 1.0, 1.0, c)
        })
        .unwrap();
        let two: Vec<Trajectory> = (0..6)
            .rev()
            .map(|r| {
                simulate_dimorphic(
                    &l,
                    &s(&[0.3, 0.7]),
                    &s(&[0.7, 0.3]),
                    1.0,
                    1.0,
                    &cfg.with_stream(r),
                )
                .unwrap()
            })
            .collect();
        for (a, b) in one.iter().zip(two.iter().rev()) {
            assert_eq!(a, b);
        }
        assert_ne!(one[0], one[1]);
    }
}
