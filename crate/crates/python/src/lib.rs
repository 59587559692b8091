//! Python bindings. Domain errors surface as `patchsel.PatchselError` whose
//! message starts with the error name.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use patchsel::{EssOptions, SimConfig, Strategy};

create_exception!(patchsel, PatchselError, PyException);

fn err(e: patchsel::Error) -> PyErr {
    PatchselError::new_err(format!("{}: {e}", e.name()))
}

fn strategy(alpha: Vec<f64>) -> PyResult<Strategy> {
    Strategy::new(alpha).map_err(err)
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Landscape", frozen)]
struct PyLandscape(patchsel::Landscape);

#[pymethods]
impl PyLandscape {
    #[new]
    fn new(mu: Vec<f64>, kappa: Vec<f64>, sigma: Vec<Vec<f64>>) -> PyResult<Self> {
        patchsel::Landscape::new(mu.len(), mu, kappa, sigma)
            .map(PyLandscape)
            .map_err(err)
    }

    #[staticmethod]
    fn symmetric(n: usize, mu: f64, kappa: f64, sigma2: f64) -> PyResult<Self> {
        patchsel::Landscape::symmetric(n, mu, kappa, sigma2)
            .map(PyLandscape)
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        patchsel::Landscape::from_json(text)
            .map(PyLandscape)
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.0.mu().to_vec()
    }

    #[getter]
    fn kappa(&self) -> Vec<f64> {
        self.0.kappa().to_vec()
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        self.0.to_file().sigma
    }

    fn is_positive_definite(&self) -> bool {
        self.0.is_positive_definite()
    }

    fn __repr__(&self) -> String {
        format!(
            "Landscape(n={}, mu={:?}, kappa={:?})",
            self.0.n(),
            self.0.mu(),
            self.0.kappa()
        )
    }
}

#[pyfunction]
fn stochastic_growth_rate(landscape: &PyLandscape, alpha: Vec<f64>) -> PyResult<f64> {
    patchsel::stochastic_growth_rate(&landscape.0, &strategy(alpha)?).map_err(err)
}

/// `(theta, k, mean)` of the stationary Gamma law.
#[pyfunction]
fn stationary_gamma(landscape: &PyLandscape, alpha: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let g = patchsel::stationary_gamma(&landscape.0, &strategy(alpha)?).map_err(err)?;
    Ok((g.theta, g.k, g.mean))
}

#[pyfunction]
fn invasion_rate(landscape: &PyLandscape, resident: Vec<f64>, invader: Vec<f64>) -> PyResult<f64> {
    patchsel::invasion_rate(&landscape.0, &strategy(resident)?, &strategy(invader)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (landscape, alpha, beta, tol_zero = patchsel::TOL_ZERO))]
fn classify_outcome<'py>(
    py: Python<'py>,
    landscape: &PyLandscape,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    tol_zero: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = patchsel::classify_outcome(&landscape.0, &strategy(alpha)?, &strategy(beta)?, tol_zero)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r_alpha", r.r_alpha)?;
    d.set_item("r_beta", r.r_beta)?;
    d.set_item("i_ab", r.i_ab)?;
    d.set_item("i_ba", r.i_ba)?;
    d.set_item("c_ab", r.c_ab)?;
    d.set_item("c_ba", r.c_ba)?;
    d.set_item("outcome", r.outcome.as_str())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (landscape, regularize = None, samples = 1000, seed = 42))]
fn solve_ess<'py>(
    py: Python<'py>,
    landscape: &PyLandscape,
    regularize: Option<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut opts = EssOptions::default().with_seed(seed);
    opts.regularization = regularize;
    opts.certify_samples = samples;
    let r = py
        .detach(|| patchsel::solve_ess(&landscape.0, &opts))
        .map_err(err)?;
    from_json(py, &r.to_json())
}

/// `(passed, violations, worst)` over vertices, edge midpoints and `samples`
/// random invaders.
#[pyfunction]
#[pyo3(signature = (landscape, alpha, samples = 1000, seed = 42))]
fn verify_ess(
    landscape: &PyLandscape,
    alpha: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<(bool, usize, f64)> {
    let c = patchsel::verify_ess(&landscape.0, &strategy(alpha)?, samples, seed).map_err(err)?;
    Ok((c.passed, c.violations, c.worst))
}

/// Monomorphic (`beta` absent) or dimorphic simulation. Returns a dict with
/// `labels`, `times`, `states` and `stats`.
#[pyfunction]
#[pyo3(signature = (landscape, alpha, beta = None, x0 = 1.0, y0 = 1.0, dt = 1e-3, t_max = 100.0, burn_in = None, seed = 42, stream = 0, record_every = 1))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    landscape: &PyLandscape,
    alpha: Vec<f64>,
    beta: Option<Vec<f64>>,
    x0: f64,
    y0: f64,
    dt: f64,
    t_max: f64,
    burn_in: Option<f64>,
    seed: u64,
    stream: u64,
    record_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = SimConfig::new(dt, t_max)
        .with_seed(seed)
        .with_record_every(record_every)
        .with_stream(stream);
    if let Some(b) = burn_in {
        cfg = cfg.with_burn_in(b);
    }
    let a = strategy(alpha)?;
    let b = beta.map(strategy).transpose()?;
    let l = &landscape.0;
    let traj = py
        .detach(|| match &b {
            None => patchsel::simulate_monomorphic(l, &a, x0, &cfg),
            Some(b) => patchsel::simulate_dimorphic(l, &a, b, x0, y0, &cfg),
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("stats", from_json(py, &traj.stats_json())?)?;
    d.set_item("labels", traj.labels)?;
    d.set_item("times", traj.times)?;
    d.set_item("states", traj.states)?;
    Ok(d)
}

/// Mean invader log-slope and its standard error over `replicates` runs.
#[pyfunction]
#[pyo3(signature = (landscape, resident, invader, x0 = 1.0, dt = 1e-3, t_max = 100.0, burn_in = None, replicates = 8, seed = 42))]
#[allow(clippy::too_many_arguments)]
fn simulate_linearized_invasion(
    py: Python<'_>,
    landscape: &PyLandscape,
    resident: Vec<f64>,
    invader: Vec<f64>,
    x0: f64,
    dt: f64,
    t_max: f64,
    burn_in: Option<f64>,
    replicates: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let mut cfg = SimConfig::new(dt, t_max)
        .with_seed(seed)
        .with_replicates(replicates)
        .with_record_every(usize::MAX);
    if let Some(b) = burn_in {
        cfg = cfg.with_burn_in(b);
    }
    let (a, b) = (strategy(resident)?, strategy(invader)?);
    let r = py
        .detach(|| patchsel::simulate_linearized_invasion(&landscape.0, &a, &b, x0, 1.0, &cfg))
        .map_err(err)?;
    Ok((r.slope, r.std_error))
}

#[pymodule]
#[pyo3(name = "patchsel")]
fn patchsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PatchselError", m.py().get_type::<PatchselError>())?;
    m.add_class::<PyLandscape>()?;
    m.add_function(wrap_pyfunction!(stochastic_growth_rate, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(invasion_rate, m)?)?;
    m.add_function(wrap_pyfunction!(classify_outcome, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ess, m)?)?;
    m.add_function(wrap_pyfunction!(verify_ess, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_linearized_invasion, m)?)?;
    Ok(())
}
