//! Evolutionarily stable patch-selection strategies.
//!
//! For a resident `α` with `r_α > 0` the invasion rate `I(α, ·)` is a concave
//! quadratic in the invader `β` whenever `Σ` is positive definite:
//!
//! `I(α, β) = res(α)·(β − α) − (β − α)ᵀΣ(β − α)/2`,
//!
//! where `res_i = μ_i − κ_i α_i r_α/⟨α,α⟩_κ − (Σα)_i + α·Σα/2`. The residual
//! always satisfies `Σ_i α_i res_i = 0`. A strategy is an ESS when the
//! residual vanishes on its support and is negative off it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::{growth_rate_unchecked, invasion_rate_unchecked, TOL_DEGENERATE, TOL_ZERO};
use crate::error::{Error, Result};
use crate::landscape::{dot, kappa_inner_unchecked, Landscape, Strategy};
use crate::rng::{dirichlet_uniform, keyed_rng};

/// Entries of an iterate below this, with negative residual, are taken to be
/// leaving the support.
const ITER_SUPPORT_CUTOFF: f64 = 1e-6;
const GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssOptions {
    /// Added to the diagonal of `Σ` before solving, e.g. for patches without noise.
    pub regularization: Option<f64>,
    pub tol_residual: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tol_bisection: f64,
    pub tol_zero: f64,
    pub certify_samples: usize,
    pub seed: u64,
    /// Initial step of the multiplicative iteration.
    pub eta0: f64,
    pub max_iter: usize,
}

impl Default for EssOptions {
    fn default() -> Self {
        EssOptions {
            regularization: None,
            tol_residual: 1e-10,
            tol_bisection: 1e-15,
            tol_zero: TOL_ZERO,
            certify_samples: 1000,
            seed: 42,
            eta0: 0.1,
            max_iter: 100_000,
        }
    }
}

impl EssOptions {
    pub fn with_regularization(mut self, eps: f64) -> Self {
        self.regularization = Some(eps);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EssKind {
    PureESS,
    MixedESS,
    NotFound,
}

impl EssKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EssKind::PureESS => "PureESS",
            EssKind::MixedESS => "MixedESS",
            EssKind::NotFound => "NotFound",
        }
    }
}

/// Summary of a Monte Carlo invasion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub checked: usize,
    /// Invaders with `I(α, β) ≥ −tol_zero·‖β − α‖²`.
    pub violations: usize,
    /// Largest `I(α, β) / ‖β − α‖²` seen.
    pub worst: f64,
    pub worst_invader: Option<Vec<f64>>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssResidual {
    pub support: Vec<usize>,
    /// `res_i` for every patch; off the support it is the first-order
    /// invasion gain of shifting weight onto patch `i`.
    pub values: Vec<f64>,
    /// `max |res_i|` over the support.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssResult {
    pub strategy: Strategy,
    pub support: Vec<usize>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    /// `−α·Σα/2`
    pub lambda: f64,
    pub kind: EssKind,
    pub certificate: Option<Certificate>,
    pub trace_len: usize,
    pub diagnostics: Vec<String>,
}

impl EssResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ess result serialises")
    }
}

/// Whether the vertex strategy on patch `i` (0-based) cannot be invaded:
/// `μ_j < σ_ij − σ_ii/2` for all `j ≠ i`.
pub fn pure_ess_check(landscape: &Landscape, i: usize) -> Result<bool> {
    let n = landscape.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    let (mu, sigma) = (landscape.mu(), landscape.sigma());
    Ok((0..n)
        .filter(|&j| j != i)
        .all(|j| mu[j] < sigma[(i, j)] - sigma[(i, i)] / 2.0))
}

/// Residual of the stationarity conditions at `a`.
pub fn ess_residual(landscape: &Landscape, a: &Strategy) -> Result<EssResidual> {
    landscape.check_len("strategy", a.len())?;
    let alpha = a.alpha();
    let r = growth_rate_unchecked(landscape, alpha);
    if r <= 0.0 {
        return Err(Error::NonpersistentStrategy { growth_rate: r });
    }
    let values = residual_values(landscape, alpha);
    let support = a.support();
    let norm = if support.len() < 2 {
        0.0
    } else {
        support
            .iter()
            .fold(0.0, |m: f64, &i| m.max(values[i].abs()))
    };
    Ok(EssResidual {
        support,
        values,
        norm,
    })
}

fn residual_values(landscape: &Landscape, alpha: &[f64]) -> Vec<f64> {
    let (mu, kappa) = (landscape.mu(), landscape.kappa());
    let s_alpha = landscape.sigma_times(alpha);
    let var = dot(alpha, &s_alpha);
    let r = dot(alpha, mu) - var / 2.0;
    let q = kappa_inner_unchecked(alpha, alpha, kappa);
    (0..alpha.len())
        .map(|i| mu[i] - kappa[i] * alpha[i] * r / q - s_alpha[i] + var / 2.0)
        .collect()
}

/// `∂res_i/∂α_l` treating the entries of `α` as free variables.
fn residual_jacobian(landscape: &Landscape, alpha: &[f64]) -> DMatrix<f64> {
    let n = alpha.len();
    let (mu, kappa, sigma) = (landscape.mu(), landscape.kappa(), landscape.sigma());
    let s_alpha = landscape.sigma_times(alpha);
    let var = dot(alpha, &s_alpha);
    let r = dot(alpha, mu) - var / 2.0;
    let q = kappa_inner_unchecked(alpha, alpha, kappa);
    DMatrix::from_fn(n, n, |i, l| {
        let dr = mu[l] - s_alpha[l];
        let dq = 2.0 * kappa[l] * alpha[l];
        let d_ratio = (dr * q - r * dq) / (q * q);
        let diag = if i == l { kappa[i] * r / q } else { 0.0 };
        -diag - kappa[i] * alpha[i] * d_ratio - sigma[(i, l)] + s_alpha[l]
    })
}

/// Checks `I(a, β) < 0` over all vertices, all edge midpoints and `samples`
/// uniform draws from the simplex (draw `k` uses the random stream `k`).
/// Invaders within `TOL_DEGENERATE` of `a` are skipped. Because `I(a, ·)`
/// vanishes quadratically at `a`, an invader counts as a violation when
/// `I(a, β) ≥ −tol_zero·‖β − a‖²`.
pub fn verify_ess(
    landscape: &Landscape,
    a: &Strategy,
    samples: usize,
    seed: u64,
) -> Result<Certificate> {
    verify_with_tol(landscape, a, samples, seed, TOL_ZERO)
}

fn verify_with_tol(
    landscape: &Landscape,
    a: &Strategy,
    samples: usize,
    seed: u64,
    tol_zero: f64,
) -> Result<Certificate> {
    landscape.check_len("strategy", a.len())?;
    let n = landscape.n();
    let alpha = a.alpha();
    let mut invaders: Vec<Vec<f64>> = Vec::with_capacity(n * (n + 1) / 2 + samples);
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        invaders.push(v);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut v = vec![0.0; n];
            v[i] = 0.5;
            v[j] = 0.5;
            invaders.push(v);
        }
    }
    for k in 0..samples {
        invaders.push(dirichlet_uniform(&mut keyed_rng(seed, k as u64), n));
    }

    let mut cert = Certificate {
        checked: 0,
        violations: 0,
        worst: f64::NEG_INFINITY,
        worst_invader: None,
        passed: true,
    };
    for beta in invaders {
        let gap = alpha
            .iter()
            .zip(&beta)
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
        if gap < TOL_DEGENERATE {
            continue;
        }
        let dist2: f64 = alpha
            .iter()
            .zip(&beta)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let inv = invasion_rate_unchecked(landscape, alpha, &beta);
        cert.checked += 1;
        if inv >= -tol_zero * dist2 {
            cert.violations += 1;
        }
        let scaled = inv / dist2;
        if scaled > cert.worst {
            cert.worst = scaled;
            cert.worst_invader = Some(beta);
        }
    }
    cert.passed = cert.violations == 0;
    Ok(cert)
}

/// ESS of the noise-free model: weights proportional to `μ_i/κ_i` on patches
/// with `μ_i > 0`.
pub fn deterministic_limit_ess(landscape: &Landscape) -> Result<Strategy> {
    let w: Vec<f64> = landscape
        .mu()
        .iter()
        .zip(landscape.kappa())
        .map(|(&m, &k)| if m > 0.0 { m / k } else { 0.0 })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::NoViablePatch);
    }
    Strategy::from_weights(w)
}

struct Candidate {
    strategy: Strategy,
    residual: EssResidual,
    certificate: Certificate,
    off_support_ok: bool,
}

impl Candidate {
    fn accepted(&self, tol_residual: f64) -> bool {
        self.certificate.passed && self.off_support_ok && self.residual.norm <= tol_residual
    }

    /// Ordering key: smaller is better.
    fn score(&self) -> (bool, usize, f64) {
        (
            !self.certificate.passed,
            self.certificate.violations,
            self.residual.norm,
        )
    }
}

/// Searches for an ESS: pure strategies first, then the interior (bisection
/// for two patches, a multiplicative fixed-point iteration otherwise), then
/// every face of the simplex. Every candidate is certified with
/// [`verify_ess`]. When nothing certifies, the best candidate is returned
/// with kind `NotFound`.
pub fn solve_ess(landscape: &Landscape, opts: &EssOptions) -> Result<EssResult> {
    let reg;
    let landscape = match opts.regularization {
        Some(eps) if eps > 0.0 => {
            reg = landscape.regularized(eps)?;
            &reg
        }
        _ => landscape,
    };
    if !landscape.is_positive_definite() {
        return Err(Error::SigmaNotPositiveDefinite {
            min_eigenvalue: landscape.min_eigenvalue(),
        });
    }
    let n = landscape.n();
    let screen = (0..n)
        .map(|i| Strategy::vertex(n, i).expect("index in range"))
        .chain(std::iter::once(Strategy::uniform(n)))
        .map(|s| growth_rate_unchecked(landscape, s.alpha()))
        .fold(f64::NEG_INFINITY, f64::max);
    if screen <= 0.0 {
        return Err(Error::NoPersistentStrategy);
    }

    let mut diagnostics = Vec::new();
    if let Some(eps) = opts.regularization {
        diagnostics.push(format!("sigma regularised by {eps:e} on the diagonal"));
    }
    let mut trace_len = 0usize;
    let mut best: Option<Candidate> = None;

    let consider = |cand: Candidate, best: &mut Option<Candidate>| -> bool {
        let ok = cand.accepted(opts.tol_residual);
        if best.as_ref().is_none_or(|b| cand.score() < b.score()) {
            *best = Some(cand);
        }
        ok
    };

    for i in 0..n {
        if !pure_ess_check(landscape, i)? {
            continue;
        }
        let v = Strategy::vertex(n, i)?;
        if growth_rate_unchecked(landscape, v.alpha()) <= 0.0 {
            diagnostics.push(format!(
                "vertex {i} passes the pure test but does not persist"
            ));
            continue;
        }
        if let Some(c) = candidate(landscape, v, opts) {
            if consider(c, &mut best) {
                return Ok(finish(
                    landscape,
                    best,
                    EssKind::PureESS,
                    trace_len,
                    diagnostics,
                ));
            }
        }
    }

    if n == 2 {
        let (root, steps, extra) = bisect_two_patch(landscape, opts.tol_bisection);
        trace_len += steps;
        if extra > 0 {
            diagnostics.push(format!(
                "g has {extra} additional sign change(s) on a {GRID_POINTS}-point grid"
            ));
        }
        if let Some(a) = root {
            if let Some(c) = Strategy::two_patch(a)
                .ok()
                .and_then(|s| candidate(landscape, s, opts))
            {
                if consider(c, &mut best) {
                    return Ok(finish(
                        landscape,
                        best,
                        EssKind::MixedESS,
                        trace_len,
                        diagnostics,
                    ));
                }
            }
        }
    } else {
        let (iterate, steps) = multiplicative_iteration(landscape, opts);
        trace_len += steps;
        for support in tie_supports(landscape, &iterate) {
            if let Some((polished, steps)) = newton_on_face(landscape, &support, Some(&iterate)) {
                trace_len += steps;
                if let Some(c) = candidate(landscape, polished, opts) {
                    consider(c, &mut best);
                }
            }
        }
        if best
            .as_ref()
            .is_some_and(|b| b.accepted(opts.tol_residual) && b.residual.support.len() > 1)
        {
            return Ok(finish(
                landscape,
                best,
                EssKind::MixedESS,
                trace_len,
                diagnostics,
            ));
        }
    }

    // Face enumeration, largest faces first.
    let mut faces: Vec<Vec<usize>> = (1u64..(1u64 << n))
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect::<Vec<_>>())
        .filter(|f| f.len() >= 2)
        .collect();
    faces.sort_by_key(|f| std::cmp::Reverse(f.len()));
    for face in faces {
        if let Some((s, steps)) = newton_on_face(landscape, &face, None) {
            trace_len += steps;
            if s.support().len() < 2 {
                continue;
            }
            if let Some(c) = candidate(landscape, s, opts) {
                if consider(c, &mut best) {
                    return Ok(finish(
                        landscape,
                        best,
                        EssKind::MixedESS,
                        trace_len,
                        diagnostics,
                    ));
                }
            }
        }
    }
    diagnostics.push("search exhausted without a certified candidate".into());
    if best.is_none() {
        // Fall back to the best-certified persisting strategy of the screen.
        for s in (0..n)
            .map(|i| Strategy::vertex(n, i).expect("index in range"))
            .chain([Strategy::uniform(n)])
        {
            if let Some(c) = candidate(landscape, s, opts) {
                consider(c, &mut best);
            }
        }
    }
    Ok(finish(
        landscape,
        best,
        EssKind::NotFound,
        trace_len,
        diagnostics,
    ))
}

fn candidate(landscape: &Landscape, s: Strategy, opts: &EssOptions) -> Option<Candidate> {
    let residual = ess_residual(landscape, &s).ok()?;
    let off_support_ok = (0..s.len())
        .filter(|i| !residual.support.contains(i))
        .all(|j| residual.values[j] < 0.0);
    let certificate = verify_with_tol(
        landscape,
        &s,
        opts.certify_samples,
        opts.seed,
        opts.tol_zero,
    )
    .ok()?;
    Some(Candidate {
        strategy: s,
        residual,
        certificate,
        off_support_ok,
    })
}

fn finish(
    landscape: &Landscape,
    best: Option<Candidate>,
    kind: EssKind,
    trace_len: usize,
    diagnostics: Vec<String>,
) -> EssResult {
    let c = best.expect("some screened strategy persists");
    let alpha = c.strategy.alpha();
    EssResult {
        lambda: -landscape.sigma_form(alpha, alpha) / 2.0,
        support: c.residual.support,
        residuals: c.residual.values,
        residual_norm: c.residual.norm,
        strategy: c.strategy,
        kind,
        certificate: Some(c.certificate),
        trace_len,
        diagnostics,
    }
}

/// `g(a) = d_1 − d_2` at `α = (a, 1 − a)`, with `d` the gradient of `I(α, ·)` at `α`.
pub fn two_patch_g(landscape: &Landscape, a: f64) -> f64 {
    let v = residual_values(landscape, &[a, 1.0 - a]);
    v[0] - v[1]
}

/// Returns the root of `g` (if `g(0) > 0 > g(1)`), the number of bisection
/// steps, and how many sign changes beyond the first `g` shows on a grid.
fn bisect_two_patch(landscape: &Landscape, tol: f64) -> (Option<f64>, usize, usize) {
    let g = |a: f64| two_patch_g(landscape, a);
    let grid: Vec<f64> = (0..=GRID_POINTS)
        .map(|k| g(k as f64 / GRID_POINTS as f64))
        .collect();
    let changes = grid
        .windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    let (g0, g1) = (grid[0], grid[GRID_POINTS]);
    if !(g0 > 0.0 && g1 < 0.0) {
        return (None, 0, changes);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut steps = 0;
    while hi - lo > tol && steps < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let root = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    (Some(root), steps, changes.saturating_sub(1))
}

/// `α_i ← α_i exp(η res_i)`, renormalised; `η` halves whenever the support
/// residual grows.
fn multiplicative_iteration(landscape: &Landscape, opts: &EssOptions) -> (Vec<f64>, usize) {
    let n = landscape.n();
    let mut alpha = vec![1.0 / n as f64; n];
    let mut eta = opts.eta0;
    let norm = |a: &[f64], res: &[f64]| {
        a.iter()
            .zip(res)
            .filter(|(&x, _)| x > ITER_SUPPORT_CUTOFF)
            .fold(0.0, |m: f64, (_, r)| m.max(r.abs()))
    };
    let mut res = residual_values(landscape, &alpha);
    let mut current = norm(&alpha, &res);
    let mut steps = 0;
    while steps < opts.max_iter && current > opts.tol_residual && eta > 1e-12 {
        steps += 1;
        let mut next: Vec<f64> = alpha
            .iter()
            .zip(&res)
            .map(|(a, r)| a * (eta * r).exp())
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        if growth_rate_unchecked(landscape, &next) <= 0.0 {
            eta *= 0.5;
            continue;
        }
        let next_res = residual_values(landscape, &next);
        let next_norm = norm(&next, &next_res);
        if next_norm > current {
            eta *= 0.5;
            continue;
        }
        alpha = next;
        res = next_res;
        current = next_norm;
    }
    (alpha, steps)
}

/// Supports to polish after the iteration. Entries that are vanishing
/// (below the cutoff with negative residual) give a reduced face; if any of
/// them is still positive the face including them is tried as well.
fn tie_supports(landscape: &Landscape, alpha: &[f64]) -> Vec<Vec<usize>> {
    let res = residual_values(landscape, alpha);
    let leaving: Vec<usize> = (0..alpha.len())
        .filter(|&i| alpha[i] <= ITER_SUPPORT_CUTOFF && res[i] < 0.0)
        .collect();
    let reduced: Vec<usize> = (0..alpha.len()).filter(|i| !leaving.contains(i)).collect();
    let full: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0).collect();
    let mut out = Vec::new();
    if reduced.len() >= 2 {
        out.push(reduced.clone());
    }
    if full != reduced && full.len() >= 2 {
        out.push(full);
    }
    out
}

/// Newton's method for `res_i = res_last` on `face`, `Σ α = 1`, from `start`
/// restricted to the face (or its barycentre). Returns `None` if it leaves
/// the open face or fails to converge.
fn newton_on_face(
    landscape: &Landscape,
    face: &[usize],
    start: Option<&[f64]>,
) -> Option<(Strategy, usize)> {
    let n = landscape.n();
    let m = face.len();
    let mut alpha = vec![0.0; n];
    match start {
        Some(s) => {
            let total: f64 = face.iter().map(|&i| s[i]).sum();
            for &i in face {
                alpha[i] = s[i] / total;
            }
        }
        None => face.iter().for_each(|&i| alpha[i] = 1.0 / m as f64),
    }
    let system = |alpha: &[f64]| -> DVector<f64> {
        let res = residual_values(landscape, alpha);
        let last = res[face[m - 1]];
        let mut f = DVector::zeros(m);
        for k in 0..m - 1 {
            f[k] = res[face[k]] - last;
        }
        f[m - 1] = face.iter().map(|&i| alpha[i]).sum::<f64>() - 1.0;
        f
    };
    let merit = |f: &DVector<f64>| f.amax();
    let mut f = system(&alpha);
    let mut steps = 0;
    while merit(&f) > 1e-15 && steps < 100 {
        steps += 1;
        let jac = residual_jacobian(landscape, &alpha);
        let last = face[m - 1];
        let j = DMatrix::from_fn(m, m, |k, l| {
            if k == m - 1 {
                1.0
            } else {
                jac[(face[k], face[l])] - jac[(last, face[l])]
            }
        });
        let delta = j.lu().solve(&(-&f))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = alpha.clone();
            for (k, &i) in face.iter().enumerate() {
                trial[i] += t * delta[k];
            }
            if face.iter().all(|&i| trial[i] > 0.0)
                && growth_rate_unchecked(landscape, &trial) > 0.0
            {
                let ft = system(&trial);
                if merit(&ft) < merit(&f) {
                    alpha = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if merit(&f) > 1e-12 {
        return None;
    }
    let total: f64 = alpha.iter().sum();
    let s = Strategy::new(alpha.iter().map(|a| a / total).collect()).ok()?;
    Some((s, steps))
}
