//! Python bindings for the `edgewave` solver.

use edgewave::scatter::{self, Baseline};
use edgewave::solver::{self, ProblemConfig};
use edgewave::{cli, flatlab, ops::MediumParams, Error, C64};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Problem configuration (medium, curve, sources, discretization).
#[pyclass(name = "Config", module = "edgewave_py", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ProblemConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConfig { inner: ProblemConfig::from_json(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyConfig { inner: ProblemConfig::load(&path).map_err(to_py)? })
    }

    /// Default scattering setup on the GaussSine interface with bump height `b`.
    #[staticmethod]
    fn scattering(b: f64) -> Self {
        PyConfig { inner: scatter::default_config(b) }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n_c(&self) -> Option<usize> {
        self.inner.n_c
    }

    #[setter]
    fn set_n_c(&mut self, n: Option<usize>) {
        self.inner.n_c = n;
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[setter]
    fn set_tau(&mut self, tau: f64) {
        self.inner.tau = tau;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner.medium;
        format!("Config(m1={}, m2={}, energy={}, curve={:?})", m.m1, m.m2, m.energy, self.inner.curve.family)
    }
}

/// Result of a solve: densities, GMRES history and field evaluation.
#[pyclass(name = "Solution", module = "edgewave_py")]
struct PySolution {
    inner: solver::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn converged(&self) -> bool {
        self.inner.report.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.report.iterations
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.report.residuals.clone()
    }

    #[getter]
    fn n_core(&self) -> usize {
        self.inner.boundary().n_core()
    }

    /// Node positions on the whole (buffered) boundary.
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.boundary().nodes.iter().map(|p| (p.pos[0], p.pos[1])).collect()
    }

    fn mu(&self) -> Vec<C64> {
        self.inner.mu()
    }

    fn rho(&self) -> Vec<C64> {
        self.inner.rho()
    }

    /// Total field u at each (x, y). Points on the interface raise ValueError.
    fn eval_field(&self, py: Python<'_>, points: Vec<[f64; 2]>) -> PyResult<Vec<C64>> {
        py.detach(|| self.inner.eval_field(&points)).map_err(to_py)
    }

    /// Like eval_field, but points within `mask` of the interface give None.
    #[pyo3(signature = (points, mask = 1e-8))]
    fn eval_field_masked(&self, py: Python<'_>, points: Vec<[f64; 2]>, mask: f64) -> PyResult<Vec<Option<C64>>> {
        py.detach(|| self.inner.eval_field_masked(&points, mask)).map_err(to_py)
    }

    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let d = py.detach(|| solver::diagnostics(&self.inner)).map_err(to_py)?;
        json_to_py(py, &d)
    }

    fn timings<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.timings)
    }
}

#[pyfunction]
fn solve(py: Python<'_>, config: &PyConfig) -> PyResult<PySolution> {
    let c = config.inner.clone();
    let inner = py.detach(|| solver::solve(&c)).map_err(to_py)?;
    Ok(PySolution { inner })
}

/// R_L, T_L and amplitudes over a grid of bump heights. Rows are dicts; failed
/// solves carry an `error` string and no `result`.
#[pyfunction]
#[pyo3(signature = (b_grid, config = None, baseline = "flat"))]
fn scatter_sweep<'py>(
    py: Python<'py>,
    b_grid: Vec<f64>,
    config: Option<&PyConfig>,
    baseline: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = match baseline {
        "flat" => Baseline::Flat,
        "zero-b" | "zero_b" => Baseline::ZeroB,
        other => return Err(PyValueError::new_err(format!("unknown baseline {other:?}"))),
    };
    let template = config.map_or_else(|| scatter::default_config(0.0), |c| c.inner.clone());
    let rows = py.detach(|| scatter::sweep_b_with(&template, &b_grid, kind)).map_err(to_py)?;
    json_to_py(py, &rows)
}

#[pyfunction]
fn default_b_grid() -> Vec<f64> {
    scatter::default_b_grid()
}

/// Flat-interface symbol a(ξ) of L for one mass.
#[pyfunction]
fn symbol_a(xi: f64, m: f64, energy: f64) -> C64 {
    flatlab::symbol_a(xi, m, energy)
}

/// Flat-interface reflection symbol R(ξ) for two masses.
#[pyfunction]
fn symbol_r(xi: f64, m1: f64, m2: f64, energy: f64) -> PyResult<f64> {
    let p = MediumParams::new(m1, m2, energy).map_err(to_py)?;
    Ok(flatlab::symbol_r(xi, &p))
}

/// Exact flat-interface field of a unit point source, by contour integration.
#[pyfunction]
fn sommerfeld_field(x: [f64; 2], src: [f64; 2], m: f64, energy: f64) -> PyResult<C64> {
    flatlab::sommerfeld_field(x, src, m, energy).map_err(to_py)
}

/// Runs the built-in consistency checks; returns (name, value, limit, pass) tuples.
#[pyfunction]
fn selftest(py: Python<'_>) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let checks = py.detach(cli::selftest).map_err(to_py)?;
    Ok(checks.into_iter().map(|c| (c.name.to_string(), c.value, c.limit, c.pass)).collect())
}

#[pymodule]
fn edgewave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(scatter_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(default_b_grid, m)?)?;
    m.add_function(wrap_pyfunction!(symbol_a, m)?)?;
    m.add_function(wrap_pyfunction!(symbol_r, m)?)?;
    m.add_function(wrap_pyfunction!(sommerfeld_field, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
