//! Environment and strategy types.
//!
//! A [`Landscape`] bundles per-patch growth rates `mu`, competition strengths
//! `kappa` and the covariance `sigma` of the environmental noise. A
//! [`Strategy`] is a point on the probability simplex giving the fraction of
//! time spent in each patch. [`DispersalMatrix`] holds inter-patch movement
//! rates whose stationary law is the strategy realised at high dispersal.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance for the positive-semidefinite check on `sigma`.
pub const TOL_PSD: f64 = 1e-10;
/// Strategies whose mass is within this of 1 are renormalised, others rejected.
pub const TOL_SIMPLEX: f64 = 1e-9;
/// Entries above this threshold count as part of a strategy's support.
pub const TOL_SUPPORT: f64 = 1e-12;

/// On-disk form of a landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeFile {
    pub n: usize,
    pub mu: Vec<f64>,
    pub kappa: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

/// A validated patchy environment.
///
/// `sigma` is stored symmetrised. The noise loading `L` satisfies
/// `L Lᵀ = sigma`, so that `L ξ` with `ξ ~ N(0, dt I)` has covariance
/// `sigma dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LandscapeFile", into = "LandscapeFile")]
pub struct Landscape {
    mu: Vec<f64>,
    kappa: Vec<f64>,
    sigma: DMatrix<f64>,
    loading: DMatrix<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl Landscape {
    /// Validates and builds a landscape. `sigma` is symmetrised as
    /// `(Σ + Σᵀ)/2` before the eigenvalue check.
    pub fn new(n: usize, mu: Vec<f64>, kappa: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch("patch count must be >= 1".into()));
        }
        if mu.len() != n || kappa.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "n = {n} but len(mu) = {}, len(kappa) = {}",
                mu.len(),
                kappa.len()
            )));
        }
        if sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!("sigma must be {n}x{n}")));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| sigma[i][j]);
        Self::from_parts(mu, kappa, sigma)
    }

    pub fn from_parts(mu: Vec<f64>, kappa: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 || kappa.len() != n || sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "len(mu) = {n}, len(kappa) = {}, sigma is {}x{}",
                kappa.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if mu
            .iter()
            .chain(kappa.iter())
            .chain(sigma.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(
                "landscape parameters must be finite".into(),
            ));
        }
        if let Some((index, &value)) = kappa.iter().enumerate().find(|(_, &k)| k <= 0.0) {
            return Err(Error::NonPositiveKappa { index, value });
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let eigen = sigma.clone().symmetric_eigen();
        let min_eigenvalue = eigen.eigenvalues.min();
        let max_eigenvalue = eigen.eigenvalues.max();
        let scale = eigen.eigenvalues.amax();
        if min_eigenvalue < -TOL_PSD * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        let loading = match sigma.clone().cholesky() {
            Some(chol) => chol.unpack(),
            None => {
                let root = eigen.eigenvalues.map(|l| l.max(0.0).sqrt());
                &eigen.eigenvectors * DMatrix::from_diagonal(&root)
            }
        };
        Ok(Landscape {
            mu,
            kappa,
            sigma,
            loading,
            min_eigenvalue,
            max_eigenvalue,
        })
    }

    /// Uncorrelated landscape: `sigma = diag(variances)`.
    pub fn uncorrelated(mu: Vec<f64>, kappa: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(variances));
        Self::from_parts(mu, kappa, sigma)
    }

    /// Homogeneous landscape with `mu_i = mu`, `kappa_i = kappa`, `sigma = sigma2 I`.
    pub fn symmetric(n: usize, mu: f64, kappa: f64, sigma2: f64) -> Result<Self> {
        Self::uncorrelated(vec![mu; n], vec![kappa; n], vec![sigma2; n])
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower factor `L` with `L Lᵀ = sigma` (Cholesky when positive definite,
    /// clipped eigendecomposition otherwise).
    pub fn noise_loading(&self) -> &DMatrix<f64> {
        &self.loading
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue > TOL_PSD * self.max_eigenvalue.abs().max(f64::MIN_POSITIVE)
    }

    /// Same landscape with `sigma + eps I`.
    pub fn regularized(&self, eps: f64) -> Result<Self> {
        let n = self.n();
        let sigma = &self.sigma + DMatrix::identity(n, n) * eps;
        Self::from_parts(self.mu.clone(), self.kappa.clone(), sigma)
    }

    pub fn to_file(&self) -> LandscapeFile {
        LandscapeFile::from(self.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LandscapeFile = serde_json::from_str(text).map_err(|e| {
            Error::ParseError(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        Landscape::try_from(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("landscape serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    // Σx as a plain vector.
    pub(crate) fn sigma_times(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).fold(0.0, |acc, j| acc + self.sigma[(i, j)] * x[j]))
            .collect()
    }

    /// `x · Σ y`.
    pub fn sigma_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.sigma_times(y))
    }

    /// `Lᵀ x`; the noise driving a population playing `x` is `(Lᵀx) · ΔB`.
    pub(crate) fn loading_for(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).fold(0.0, |acc, i| acc + self.loading[(i, j)] * x[i]))
            .collect()
    }

    pub(crate) fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {len}, landscape has {} patches",
                self.n()
            )));
        }
        Ok(())
    }
}

impl TryFrom<LandscapeFile> for Landscape {
    type Error = Error;

    fn try_from(f: LandscapeFile) -> Result<Self> {
        Landscape::new(f.n, f.mu, f.kappa, f.sigma)
    }
}

impl From<Landscape> for LandscapeFile {
    fn from(l: Landscape) -> Self {
        let n = l.n();
        LandscapeFile {
            n,
            sigma: (0..n)
                .map(|i| (0..n).map(|j| l.sigma[(i, j)]).collect())
                .collect(),
            mu: l.mu,
            kappa: l.kappa,
        }
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// `⟨x, y⟩_κ = Σ κ_i x_i y_i`.
pub fn kappa_inner(x: &[f64], y: &[f64], landscape: &Landscape) -> Result<f64> {
    landscape.check_len("x", x.len())?;
    landscape.check_len("y", y.len())?;
    Ok(kappa_inner_unchecked(x, y, landscape.kappa()))
}

pub(crate) fn kappa_inner_unchecked(x: &[f64], y: &[f64], kappa: &[f64]) -> f64 {
    kappa
        .iter()
        .zip(x.iter().zip(y))
        .fold(0.0, |acc, (k, (a, b))| acc + k * (a * b))
}

/// A patch-selection strategy: non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Strategy(Vec<f64>);

impl Strategy {
    /// Accepts weights whose sum is within [`TOL_SIMPLEX`] of one and whose
    /// entries are no more negative than `-TOL_SIMPLEX`; such input is clipped
    /// and renormalised. Anything else is rejected.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::DimensionMismatch(
                "strategy must be non-empty".into(),
            ));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("strategy entries must be finite".into()));
        }
        if let Some(a) = alpha.iter().find(|&&a| a < -TOL_SIMPLEX) {
            return Err(Error::NotOnSimplex(format!("negative entry {a}")));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > TOL_SIMPLEX {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        let clipped: Vec<f64> = alpha.iter().map(|a| a.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let s = Strategy(clipped.into_iter().map(|a| a / total).collect());
        if s.support().is_empty() {
            return Err(Error::NotOnSimplex("empty support".into()));
        }
        Ok(s)
    }

    /// Builds a strategy from arbitrary non-negative weights by normalising.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::NotOnSimplex(
                "weights must be non-negative with positive sum".into(),
            ));
        }
        Strategy::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        let mut alpha = vec![0.0; n];
        alpha[i] = 1.0;
        Ok(Strategy(alpha))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy needs at least one patch");
        Strategy(vec![1.0 / n as f64; n])
    }

    /// Two-patch strategy `(a, 1 - a)`.
    pub fn two_patch(a: f64) -> Result<Self> {
        Strategy::new(vec![a, 1.0 - a])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices with weight above [`TOL_SUPPORT`].
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > TOL_SUPPORT)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn distance_inf(&self, other: &Strategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

impl TryFrom<Vec<f64>> for Strategy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Strategy::new(v)
    }
}

impl From<Strategy> for Vec<f64> {
    fn from(s: Strategy) -> Self {
        s.0
    }
}

impl AsRef<[f64]> for Strategy {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Inter-patch movement: individuals move from `i` to `j` at rate `delta * d[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersalMatrix {
    d: DMatrix<f64>,
    delta: f64,
}

impl DispersalMatrix {
    /// `d` must have non-negative off-diagonal entries and zero row sums.
    pub fn new(d: Vec<Vec<f64>>, delta: f64) -> Result<Self> {
        let n = d.len();
        if n == 0 || d.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(
                "dispersal matrix must be square and non-empty".into(),
            ));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| d[i][j]), delta)
    }

    pub fn from_matrix(d: DMatrix<f64>, delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidDispersal(format!(
                "delta = {delta} must be >= 0"
            )));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dispersal rates must be finite".into()));
        }
        let n = d.nrows();
        let scale = d.amax().max(1.0);
        for i in 0..n {
            for j in 0..n {
                if i != j && d[(i, j)] < 0.0 {
                    return Err(Error::InvalidDispersal(format!(
                        "d[{i}][{j}] = {} < 0",
                        d[(i, j)]
                    )));
                }
            }
            let row_sum: f64 = d.row(i).iter().sum();
            if row_sum.abs() > 1e-12 * scale * n as f64 {
                return Err(Error::InvalidDispersal(format!(
                    "row {i} sums to {row_sum}"
                )));
            }
        }
        Ok(DispersalMatrix { d, delta })
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::from_matrix(self.d.clone(), delta)
    }
}

/// Unique stationary distribution `α` of the rate matrix: `αᵀ D = 0`, `Σ α = 1`.
///
/// Solved as the overdetermined system `[Dᵀ; 1ᵀ] α = e_{n+1}`; a rank below `n`
/// means the stationary law is not unique.
pub fn dispersal_stationary(dispersal: &DispersalMatrix) -> Result<Strategy> {
    let n = dispersal.n();
    let d = dispersal.rates();
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(&d.transpose());
    a.row_mut(n).fill(1.0);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;

    let svd = a.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1.0) * (n + 1) as f64;
    let rank = svd.rank(tol);
    if rank < n {
        return Err(Error::NoUniqueStationary {
            rank_deficiency: n - rank,
        });
    }
    let alpha = svd
        .solve(&rhs, tol)
        .expect("svd computed with both factors");
    Strategy::new(
        alpha
            .iter()
            .map(|&v| if v.abs() < 1e-15 { 0.0 } else { v })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest, ProptestConfig};
    use proptest::strategy::Strategy as PStrategy;

    fn sym() -> Landscape {
        Landscape::new(
            2,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn builds_symmetric_landscape() {
        let l = sym();
        assert_eq!(l.n(), 2);
        assert!(l.is_positive_definite());
        let ll = l.noise_loading() * l.noise_loading().transpose();
        assert_abs_diff_eq!(ll, l.sigma().clone(), epsilon = 1e-14);
    }

    #[test]
    fn rejects_negative_kappa() {
        let err = Landscape::new(
            2,
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::NonPositiveKappa {
                index: 1,
                value: -1.0
            }
        );
    }

    #[test]
    fn rejects_indefinite_sigma() {
        let err = Landscape::new(
            2,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        )
        .unwrap_err();
        match err {
            Error::NotPositiveSemidefinite { min_eigenvalue } => {
                assert_abs_diff_eq!(min_eigenvalue, -1.0, epsilon = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let err = Landscape::new(
            3,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let err = Landscape::new(
            2,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![1.0], vec![0.0, 1.0]],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn symmetrises_sigma() {
        let l = Landscape::new(
            2,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.2], vec![0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(l.sigma()[(0, 1)], 0.1);
        assert_eq!(l.sigma()[(1, 0)], 0.1);
    }

    #[test]
    fn singular_sigma_gets_eigen_loading() {
        let l = Landscape::uncorrelated(vec![1.0, -0.4], vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(!l.is_positive_definite());
        let ll = l.noise_loading() * l.noise_loading().transpose();
        assert_abs_diff_eq!(ll, l.sigma().clone(), epsilon = 1e-14);
        let zero = Landscape::uncorrelated(vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.noise_loading().amax(), 0.0);
    }

    #[test]
    fn kappa_inner_examples() {
        let l = sym();
        assert_eq!(kappa_inner(&[0.5, 0.5], &[0.5, 0.5], &l).unwrap(), 0.5);
        assert_eq!(kappa_inner(&[1.0, 0.0], &[0.0, 1.0], &l).unwrap(), 0.0);
        let k31 = Landscape::uncorrelated(vec![1.0, 1.0], vec![3.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            kappa_inner(&[0.5, 0.5], &[0.5, 0.5], &k31).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            kappa_inner(&[1.0], &[1.0, 0.0], &l),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn strategy_validation() {
        let s = Strategy::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert_abs_diff_eq!(s.alpha().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(Strategy::new(vec![0.5, 0.6]).is_err());
        assert!(Strategy::new(vec![1.1, -0.1]).is_err());
        assert!(Strategy::new(vec![]).is_err());
        assert_eq!(
            Strategy::new(vec![1.0, 0.0, 1e-13]).unwrap().support(),
            vec![0]
        );
        assert_eq!(Strategy::vertex(3, 1).unwrap().alpha(), &[0.0, 1.0, 0.0]);
        assert!(Strategy::vertex(3, 3).is_err());
    }

    #[test]
    fn dispersal_stationary_examples() {
        let d = DispersalMatrix::new(vec![vec![-1.0, 1.0], vec![2.0, -2.0]], 1.0).unwrap();
        let alpha = dispersal_stationary(&d).unwrap();
        // Hand solution of a*(-1) + b*2 = 0, a + b = 1.
        assert_abs_diff_eq!(alpha.alpha()[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(alpha.alpha()[1], 1.0 / 3.0, epsilon = 1e-14);

        let d = DispersalMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], 1.0).unwrap();
        let alpha = dispersal_stationary(&d).unwrap();
        assert_abs_diff_eq!(alpha.alpha()[0], 0.5, epsilon = 1e-14);

        let d = DispersalMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], 1.0).unwrap();
        assert_eq!(
            dispersal_stationary(&d).unwrap_err(),
            Error::NoUniqueStationary { rank_deficiency: 1 }
        );
    }

    #[test]
    fn dispersal_matrix_validation() {
        assert!(DispersalMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -2.0]], 1.0).is_err());
        assert!(DispersalMatrix::new(vec![vec![1.0, -1.0], vec![1.0, -1.0]], 1.0).is_err());
        assert!(DispersalMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], -1.0).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let l = Landscape::new(
            2,
            vec![0.1 + 0.2, -1.0 / 3.0],
            vec![1.0, std::f64::consts::PI],
            vec![vec![0.7, 0.1], vec![0.1, 1.0 / 7.0]],
        )
        .unwrap();
        let back = Landscape::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn parse_error_reports_position() {
        let err = Landscape::from_json("{\n  \"n\": 2,\n  \"mu\": [1, }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    fn unit_vec(n: usize) -> impl PStrategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n)
    }

    fn random_rate_matrix() -> impl PStrategy<Value = Vec<Vec<f64>>> {
        (2usize..5).prop_flat_map(|n| {
            proptest::collection::vec(proptest::collection::vec(0.05f64..3.0, n), n).prop_map(
                move |mut d| {
                    for (i, row) in d.iter_mut().enumerate() {
                        row[i] = 0.0;
                        let s: f64 = row.iter().sum();
                        row[i] = -s;
                    }
                    d
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kappa_inner_cauchy_schwarz(x in unit_vec(3), y in unit_vec(3), k in proptest::collection::vec(0.01f64..5.0, 3)) {
            let l = Landscape::uncorrelated(vec![1.0; 3], k, vec![1.0; 3]).unwrap();
            let xy = kappa_inner(&x, &y, &l).unwrap();
            let xx = kappa_inner(&x, &x, &l).unwrap();
            let yy = kappa_inner(&y, &y, &l).unwrap();
            prop_assert!(xy * xy <= xx * yy * (1.0 + 1e-12) + 1e-300);
            prop_assert_eq!(xy, kappa_inner(&y, &x, &l).unwrap());
        }
    }

    proptest! {
        #[test]
        fn stationary_solves_balance(d in random_rate_matrix()) {
            let n = d.len();
            let dm = DispersalMatrix::new(d.clone(), 1.0).unwrap();
            let alpha = dispersal_stationary(&dm).unwrap();
            let a = alpha.alpha();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(a.iter().all(|&v| v >= 0.0));
            for i in 0..n {
                let flux: f64 = a.iter().zip(&d).map(|(aj, row)| aj * row[i]).sum();
                prop_assert!(flux.abs() <= 1e-10, "flux {}", flux);
            }
        }

        #[test]
        fn rebuild_is_idempotent(mu in proptest::collection::vec(-1.0f64..2.0, 3),
                                 kappa in proptest::collection::vec(0.1f64..3.0, 3),
                                 g in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let gm = DMatrix::from_row_slice(3, 3, &g);
            let sigma = gm.transpose() * gm;
            let l = Landscape::from_parts(mu, kappa, sigma).unwrap();
            let f = l.to_file();
            let again = Landscape::new(f.n, f.mu, f.kappa, f.sigma).unwrap();
            prop_assert_eq!(again, l);
        }

        #[test]
        fn strategies_stay_on_simplex(w in proptest::collection::vec(0.0f64..1.0, 1..6)) {
            prop_assume!(w.iter().sum::<f64>() > 1e-6);
            let s = Strategy::from_weights(w).unwrap();
            prop_assert!((s.alpha().iter().sum::<f64>() - 1.0).abs() <= TOL_SIMPLEX);
            prop_assert!(s.alpha().iter().all(|&a| a >= 0.0));
        }
    }
}
