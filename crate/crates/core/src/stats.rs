//! Goodness-of-fit helpers for checking simulated samples against the
//! stationary law.

use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS statistic against Gamma with shape `k` and scale `theta`.
pub fn ks_gamma(samples: &[f64], k: f64, theta: f64) -> Result<f64> {
    let law =
        Gamma::new(k, 1.0 / theta).map_err(|e| Error::InvalidConfig(format!("gamma law: {e}")))?;
    Ok(ks_statistic(samples, |x| law.cdf(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quantiles_have_small_statistic() {
        // Midpoint quantiles of Exp(1): F(x) = 1 − e^{−x}.
        let n = 1000;
        let xs: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        let d = ks_gamma(&xs, 1.0, 1.0).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12, "{d}");
    }

    #[test]
    fn wrong_law_is_detected() {
        let n = 1000;
        let xs: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        assert!(ks_gamma(&xs, 1.0, 0.5).unwrap() > 0.2);
    }
}
