//! Grid evaluations: pairwise outcomes over two-patch strategy pairs, and
//! ESSs along one landscape parameter.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{classify_outcome, mean_abundance, InvasionReport};
use crate::error::{Error, Result};
use crate::ess::{solve_ess, EssKind, EssOptions};
use crate::format_f64;
use crate::landscape::{Landscape, Strategy};
use crate::sim::SimConfig;

/// `resolution` evenly spaced values from `lo` to `hi`; a single value is `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidSweep("resolution must be >= 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidSweep("axis bounds must be finite".into()));
        }
        Ok(Axis { lo, hi, resolution })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.resolution == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.resolution - 1) as f64;
        (0..self.resolution)
            .map(|k| {
                if k + 1 == self.resolution {
                    self.hi
                } else {
                    self.lo + k as f64 * step
                }
            })
            .collect()
    }

    fn check_unit(&self) -> Result<()> {
        let inside = |v: f64| (0.0..=1.0).contains(&v);
        if !inside(self.lo) || !inside(self.hi) {
            return Err(Error::InvalidSweep(format!(
                "strategy axis [{}, {}] leaves [0, 1]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `lo:hi:resolution`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidSweep(format!("axis `{s}` is not lo:hi:resolution"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let res = parts[2].trim().parse().map_err(|_| bad())?;
        Axis::new(lo, hi, res)
    }
}

/// Tabular sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SweepTable {
    /// Writes a `# key=value ...` provenance line, the header, then the rows.
    pub fn write_csv<W: Write>(&self, provenance: &str, mut out: W) -> Result<()> {
        writeln!(out, "# {provenance}")?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One-line provenance record: `patchsel <label> dt=.. t_max=.. burn_in=..
/// replicates=.. seed=..` followed by `extra` as `key=value` pairs.
pub fn provenance(label: &str, cfg: &SimConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "patchsel {label} dt={} t_max={} burn_in={} replicates={} seed={}",
        cfg.dt, cfg.t_max, cfg.burn_in, cfg.replicates, cfg.seed
    );
    for (k, v) in extra {
        s.push_str(&format!(" {k}={v}"));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCell {
    pub alpha1: f64,
    pub beta1: f64,
    pub report: InvasionReport,
}

/// Outcome of `(α_1, 1 − α_1)` against `(β_1, 1 − β_1)` over the grid, `α_1`
/// varying slowest.
pub fn pair_sweep(
    landscape: &Landscape,
    alpha: Axis,
    beta: Axis,
    tol_zero: f64,
) -> Result<Vec<PairCell>> {
    if landscape.n() != 2 {
        return Err(Error::InvalidSweep(format!(
            "strategy sweeps need a two-patch landscape, got n = {}",
            landscape.n()
        )));
    }
    alpha.check_unit()?;
    beta.check_unit()?;
    let (av, bv) = (alpha.values(), beta.values());
    let cells: Vec<(f64, f64)> = av
        .iter()
        .flat_map(|&a| bv.iter().map(move |&b| (a, b)))
        .collect();
    cells
        .into_par_iter()
        .map(|(a1, b1)| {
            let (a, b) = (Strategy::two_patch(a1)?, Strategy::two_patch(b1)?);
            Ok(PairCell {
                alpha1: a1,
                beta1: b1,
                report: classify_outcome(landscape, &a, &b, tol_zero)?,
            })
        })
        .collect()
}

pub fn pair_table(cells: &[PairCell]) -> SweepTable {
    SweepTable {
        header: ["alpha1", "beta1", "i_ab", "i_ba", "outcome"]
            .map(String::from)
            .to_vec(),
        rows: cells
            .iter()
            .map(|c| {
                vec![
                    format_f64(c.alpha1),
                    format_f64(c.beta1),
                    format_f64(c.report.i_ab),
                    format_f64(c.report.i_ba),
                    c.report.outcome.as_str().to_string(),
                ]
            })
            .collect(),
    }
}

/// Landscape parameter varied by an ESS sweep. Indices are 0-based; the text
/// form (`mu:2`, `kappa:1`, `sigma:2`, `sigma2`) is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    Mu(usize),
    Kappa(usize),
    /// One diagonal entry of `Σ`.
    Sigma(usize),
    /// Every diagonal entry of `Σ`.
    Sigma2,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidSweep(format!(
                "unknown sweep parameter `{s}` (mu:i, kappa:i, sigma:i or sigma2)"
            ))
        };
        if s == "sigma2" {
            return Ok(SweepParam::Sigma2);
        }
        let (name, idx) = s.split_once(':').ok_or_else(bad)?;
        let i: usize = idx.parse().map_err(|_| bad())?;
        if i == 0 {
            return Err(bad());
        }
        match name {
            "mu" => Ok(SweepParam::Mu(i - 1)),
            "kappa" => Ok(SweepParam::Kappa(i - 1)),
            "sigma" => Ok(SweepParam::Sigma(i - 1)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepParam::Mu(i) => write!(f, "mu:{}", i + 1),
            SweepParam::Kappa(i) => write!(f, "kappa:{}", i + 1),
            SweepParam::Sigma(i) => write!(f, "sigma:{}", i + 1),
            SweepParam::Sigma2 => write!(f, "sigma2"),
        }
    }
}

impl SweepParam {
    /// Copy of `landscape` with the parameter set to `value`.
    pub fn apply(self, landscape: &Landscape, value: f64) -> Result<Landscape> {
        let n = landscape.n();
        let mut mu = landscape.mu().to_vec();
        let mut kappa = landscape.kappa().to_vec();
        let mut sigma = landscape.sigma().clone();
        let check = |i: usize| {
            if i >= n {
                Err(Error::IndexOutOfRange { index: i, n })
            } else {
                Ok(())
            }
        };
        match self {
            SweepParam::Mu(i) => {
                check(i)?;
                mu[i] = value;
            }
            SweepParam::Kappa(i) => {
                check(i)?;
                kappa[i] = value;
            }
            SweepParam::Sigma(i) => {
                check(i)?;
                sigma[(i, i)] = value;
            }
            SweepParam::Sigma2 => (0..n).for_each(|i| sigma[(i, i)] = value),
        }
        Landscape::from_parts(mu, kappa, sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssCell {
    pub value: f64,
    pub strategy: Strategy,
    pub kind: EssKind,
    pub mean_abundance: f64,
}

/// Solves for the ESS at every value of `param`, in axis order.
pub fn ess_sweep(
    landscape: &Landscape,
    param: SweepParam,
    axis: Axis,
    opts: &EssOptions,
) -> Result<Vec<EssCell>> {
    axis.values()
        .into_par_iter()
        .map(|v| {
            let l = param.apply(landscape, v)?;
            let res = solve_ess(&l, opts)?;
            Ok(EssCell {
                value: v,
                mean_abundance: mean_abundance(&l, &res.strategy)?,
                strategy: res.strategy,
                kind: res.kind,
            })
        })
        .collect()
}

pub fn ess_table(cells: &[EssCell], n: usize) -> SweepTable {
    let mut header = vec!["param".to_string()];
    header.extend((1..=n).map(|i| format!("alpha{i}")));
    header.push("kind".into());
    header.push("mean_abundance".into());
    SweepTable {
        header,
        rows: cells
            .iter()
            .map(|c| {
                let mut r = vec![format_f64(c.value)];
                r.extend(c.strategy.alpha().iter().map(|&a| format_f64(a)));
                r.push(c.kind.as_str().into());
                r.push(format_f64(c.mean_abundance));
                r
            })
            .collect(),
    }
}
