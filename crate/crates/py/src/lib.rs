//! Python bindings. Composite results (estimates, reports, finite-horizon
//! paths) are returned as plain dicts built from their JSON form.

use std::cell::RefCell;
use std::path::PathBuf;

use forestmfg_core::dynamics::{counterfactual_panel, simulate_path, simulate_reflected};
use forestmfg_core::equilibrium::{
    classify_sustainability, q_mfe_finite_horizon, q_mfe_stationary, q_no_interaction, q_pro,
    time_grid, Bequest, EquilibriumSolution, FiniteHorizonOptions, Sustainability,
};
use forestmfg_core::estimation::{
    fit_beliefs as core_fit_beliefs, fit_gamma as core_fit_gamma, fit_gbm as core_fit_gbm,
    FixedParams, GammaOptions, GbmControl, GbmOptions, MomentSet,
};
use forestmfg_core::instrument::{
    haversine_km as core_haversine, linguistic_distance as core_ld, LanguageClassification,
};
use forestmfg_core::panel::Panel;
use forestmfg_core::{adherence_grid, belief_moment as core_moment, BeliefPrior, G1Form, G2Form, ModelParams};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(forestmfg, NonConvergenceError, PyRuntimeError);

fn err(e: forestmfg_core::Error) -> PyErr {
    if e.is_non_convergence() {
        NonConvergenceError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "ModelParams", frozen, skip_from_py_object, module = "forestmfg")]
#[derive(Clone)]
pub struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    /// `g1` is "unit" or "one-minus-pow" (1 - c a^k1); `g2` is "pow" (a^k2) or "zero".
    #[new]
    #[pyo3(signature = (mu, sigma, rho, gamma, g1 = "unit", c = 1.0, k1 = 1.0, g2 = "pow", k2 = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(mu: f64, sigma: f64, rho: f64, gamma: f64, g1: &str, c: f64, k1: f64, g2: &str, k2: f64) -> PyResult<Self> {
        let g1_form = match g1 {
            "unit" => G1Form::Unit,
            "one-minus-pow" => G1Form::OneMinusPowA { c, k1 },
            other => return Err(PyValueError::new_err(format!("unknown g1 form `{other}`"))),
        };
        let g2_form = match g2 {
            "pow" => G2Form::PowA { k2 },
            "zero" => G2Form::Zero,
            other => return Err(PyValueError::new_err(format!("unknown g2 form `{other}`"))),
        };
        let inner = ModelParams::new(mu, sigma, rho, gamma, g1_form, g2_form).map_err(err)?;
        Ok(PyModelParams { inner })
    }

    #[staticmethod]
    fn table5() -> Self {
        PyModelParams { inner: ModelParams::table5() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyModelParams { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("params serialize")
    }

    fn with_gamma(&self, gamma: f64) -> PyResult<Self> {
        Ok(PyModelParams { inner: self.inner.with_gamma(gamma).map_err(err)? })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    /// `mu - sigma^2 / 2`.
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("ModelParams({})", self.to_json())
    }
}

#[pyclass(name = "BeliefPrior", frozen, skip_from_py_object, module = "forestmfg")]
#[derive(Clone)]
pub struct PyBeliefPrior {
    inner: BeliefPrior,
}

#[pymethods]
impl PyBeliefPrior {
    #[new]
    fn new(alpha: f64, beta: f64) -> PyResult<Self> {
        Ok(PyBeliefPrior { inner: BeliefPrior::new(alpha, beta).map_err(err)? })
    }

    #[staticmethod]
    fn table5() -> Self {
        PyBeliefPrior { inner: BeliefPrior::table5() }
    }

    #[staticmethod]
    fn with_mean(mean: f64, concentration: f64) -> PyResult<Self> {
        Ok(PyBeliefPrior { inner: BeliefPrior::with_mean(mean, concentration).map_err(err)? })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn pdf(&self, a: f64) -> f64 {
        self.inner.pdf(a)
    }

    fn __repr__(&self) -> String {
        format!("BeliefPrior(alpha={}, beta={})", self.inner.alpha, self.inner.beta)
    }
}

#[pyclass(name = "EquilibriumSolution", frozen, module = "forestmfg")]
pub struct PyEquilibrium {
    inner: EquilibriumSolution,
}

#[pymethods]
impl PyEquilibrium {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.clone()
    }
    #[getter]
    fn q_rate(&self) -> Vec<f64> {
        self.inner.q_rate.clone()
    }
    #[getter]
    fn q_tilde_star(&self) -> f64 {
        self.inner.q_tilde_star
    }
    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }
    #[getter]
    fn crossing(&self) -> Option<f64> {
        self.inner.crossing
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }
    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Exact policy at any adherence in [0, 1].
    fn rate_at(&self, a: f64) -> PyResult<f64> {
        self.inner.rate_at(a).map_err(err)
    }

    /// "sustainable", "unsustainable" or "switches".
    fn sustainability(&self) -> &'static str {
        match classify_sustainability(&self.inner) {
            Sustainability::SustainableForAll => "sustainable",
            Sustainability::UnsustainableForAll => "unsustainable",
            Sustainability::SwitchesAt(_) => "switches",
        }
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("solution serializes")
    }

    fn __len__(&self) -> usize {
        self.inner.grid.len()
    }
}

/// Stationary equilibrium on an explicit grid, or on `n` equispaced points.
#[pyfunction]
#[pyo3(name = "q_mfe_stationary", signature = (params, prior, grid = None, n = 101))]
fn py_q_mfe_stationary(
    params: &PyModelParams,
    prior: &PyBeliefPrior,
    grid: Option<Vec<f64>>,
    n: usize,
) -> PyResult<PyEquilibrium> {
    let grid = grid.unwrap_or_else(|| adherence_grid(n));
    let inner = q_mfe_stationary(&params.inner, &prior.inner, &grid).map_err(err)?;
    Ok(PyEquilibrium { inner })
}

#[pyfunction]
#[pyo3(name = "q_no_interaction")]
fn py_q_no_interaction(a: f64, params: &PyModelParams) -> PyResult<f64> {
    q_no_interaction(a, &params.inner).map_err(err)
}

#[pyfunction]
#[pyo3(name = "q_pro")]
fn py_q_pro(a: f64, params: &PyModelParams, prior: &PyBeliefPrior) -> PyResult<f64> {
    q_pro(a, &params.inner, &prior.inner).map_err(err)
}

/// `E[f(a)]` under the prior for a Python callable `f`.
#[pyfunction]
#[pyo3(name = "belief_moment")]
fn py_belief_moment(prior: &PyBeliefPrior, f: &Bound<'_, PyAny>) -> PyResult<f64> {
    let failure: RefCell<Option<PyErr>> = RefCell::new(None);
    let v = core_moment(&prior.inner, |a| match f.call1((a,)).and_then(|r| r.extract::<f64>()) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    v.map_err(err)
}

/// Finite-horizon equilibrium as a dict (`rate_path[i][j]` is adherence i, time j).
#[pyfunction]
#[pyo3(name = "q_mfe_finite_horizon", signature = (params, prior, horizon, time_points = 101, grid_points = 11, bequest = (0.5, 0.5), tol = 1e-10, max_iter = 500))]
#[allow(clippy::too_many_arguments)]
fn py_q_mfe_finite_horizon<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    prior: &PyBeliefPrior,
    horizon: f64,
    time_points: usize,
    grid_points: usize,
    bequest: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let b = Bequest { intercept: bequest.0, slope: bequest.1 };
    let sol = q_mfe_finite_horizon(
        &params.inner,
        &prior.inner,
        horizon,
        &time_grid(horizon, time_points),
        &adherence_grid(grid_points),
        &b,
        &FiniteHorizonOptions { tol, max_iter },
    )
    .map_err(err)?;
    to_py(py, &sol)
}

/// Returns `(times, values)`; a `cap` reflects the path at that level.
#[pyfunction]
#[pyo3(name = "simulate_path", signature = (x0, rate, params, horizon, dt = 1.0, seed = 42, cap = None))]
fn py_simulate_path(
    x0: f64,
    rate: f64,
    params: &PyModelParams,
    horizon: f64,
    dt: f64,
    seed: u64,
    cap: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let t = match cap {
        Some(s) => simulate_reflected(x0, rate, &params.inner, s, horizon, dt, seed),
        None => simulate_path(x0, rate, &params.inner, horizon, dt, seed),
    }
    .map_err(err)?;
    Ok((t.times, t.values))
}

#[pyfunction]
#[pyo3(name = "fit_beliefs")]
fn py_fit_beliefs<'py>(py: Python<'py>, shares: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &core_fit_beliefs(&shares).map_err(err)?)
}

fn load_panel(path: PathBuf) -> PyResult<Panel> {
    Panel::from_csv_path(&path).map_err(err)
}

#[pyfunction]
#[pyo3(name = "fit_gbm", signature = (panel_csv, n_boot = 3000, seed = 42))]
fn py_fit_gbm<'py>(py: Python<'py>, panel_csv: PathBuf, n_boot: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let panel = load_panel(panel_csv)?;
    let r = core_fit_gbm(&panel, GbmControl::None, &GbmOptions { n_boot, seed }).map_err(err)?;
    to_py(py, &r)
}

/// `moments` is "mean" or "mean-and-variance".
#[pyfunction]
#[pyo3(name = "fit_gamma", signature = (panel_csv, params, prior, k = 1.0, moments = "mean"))]
fn py_fit_gamma<'py>(
    py: Python<'py>,
    panel_csv: PathBuf,
    params: &PyModelParams,
    prior: &PyBeliefPrior,
    k: f64,
    moments: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let m = match moments {
        "mean" => MomentSet::MeanOnly,
        "mean-and-variance" => MomentSet::MeanAndVariance,
        other => return Err(PyValueError::new_err(format!("unknown moment set `{other}`"))),
    };
    let panel = load_panel(panel_csv)?;
    let r = core_fit_gamma(&panel, FixedParams::from(&params.inner), &prior.inner, k, m, &GammaOptions::default())
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(name = "counterfactual", signature = (panel_csv, params, prior, base_year = 1992, end_year = 2013))]
fn py_counterfactual<'py>(
    py: Python<'py>,
    panel_csv: PathBuf,
    params: &PyModelParams,
    prior: &PyBeliefPrior,
    base_year: i32,
    end_year: i32,
) -> PyResult<Bound<'py, PyAny>> {
    let panel = load_panel(panel_csv)?;
    let r = counterfactual_panel(&panel, &params.inner, &prior.inner, (base_year, end_year)).map_err(err)?;
    to_py(py, &r)
}

/// Distance between two semicolon-delimited classification paths.
#[pyfunction]
#[pyo3(name = "linguistic_distance", signature = (path1, path2, lam = 0.5))]
fn py_linguistic_distance(path1: &str, path2: &str, lam: f64) -> PyResult<f64> {
    let parse = |p: &str| LanguageClassification::parse(p.rsplit(';').next().unwrap_or("").trim(), p).map_err(err);
    core_ld(&parse(path1)?, &parse(path2)?, lam).map_err(err)
}

#[pyfunction]
#[pyo3(name = "haversine_km")]
fn py_haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> PyResult<f64> {
    core_haversine(lat1, lon1, lat2, lon2).map_err(err)
}

#[pymodule]
fn forestmfg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyBeliefPrior>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add_function(wrap_pyfunction!(py_q_mfe_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(py_q_no_interaction, m)?)?;
    m.add_function(wrap_pyfunction!(py_q_pro, m)?)?;
    m.add_function(wrap_pyfunction!(py_belief_moment, m)?)?;
    m.add_function(wrap_pyfunction!(py_q_mfe_finite_horizon, m)?)?;
    m.add_function(wrap_pyfunction!(py_simulate_path, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_beliefs, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_gbm, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(py_counterfactual, m)?)?;
    m.add_function(wrap_pyfunction!(py_linguistic_distance, m)?)?;
    m.add_function(wrap_pyfunction!(py_haversine_km, m)?)?;
    Ok(())
}
