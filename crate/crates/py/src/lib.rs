//! Python bindings: panel datasets, identification checks, CMLE fitting,
//! likelihood evaluation, profiling, simulation, and Monte Carlo studies.
//!
//! Reports are returned as plain dicts with the same field names as the CLI
//! JSON payloads. Covariate values cross the boundary as ints or rational
//! literal strings (`"p/q"`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyList, PyString};
use serde_json::Value;

use condpanel::estimation::{
    fit_cmle as fit_cmle_rs, profile_with_options, Component, EstimationError, FitOptions,
};
use condpanel::identification::{
    check_identification as check_identification_rs,
    dataset_identification as dataset_identification_rs, Criterion,
};
use condpanel::likelihood::CondLikContext;
use condpanel::model::{
    parse_rational, rational_from_int, rational_to_string, FeedbackSpec, PanelDataset, Support,
    Theta,
};
use condpanel::report::{fit_payload, identification_payload, monte_carlo_payload};
use condpanel::simulation::{monte_carlo as monte_carlo_rs, simulate_panel};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_spec(tag: u8) -> PyResult<FeedbackSpec> {
    FeedbackSpec::from_tag(tag)
        .ok_or_else(|| PyValueError::new_err(format!("spec must be 1 or 2, got {tag}")))
}

fn parse_support(items: Vec<Bound<'_, PyAny>>) -> PyResult<Support> {
    let mut values = Vec::with_capacity(items.len());
    for item in items {
        if let Ok(n) = item.extract::<i64>() {
            values.push(rational_from_int(n));
        } else if let Ok(s) = item.extract::<String>() {
            values.push(parse_rational(&s).map_err(value_error)?);
        } else {
            return Err(PyValueError::new_err(
                "support entries must be ints or rational literal strings",
            ));
        }
    }
    Support::new(values).map_err(value_error)
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                PyFloat::new(py, n.as_f64().unwrap_or(f64::NAN)).into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, item) in map {
                dict.set_item(key, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// A balanced panel bound to one feedback spec and covariate support.
#[pyclass(name = "PanelDataset")]
struct PyPanelDataset {
    inner: PanelDataset,
}

#[pymethods]
impl PyPanelDataset {
    /// Load a panel CSV (columns id,t,x,y) against a spec and support.
    #[staticmethod]
    fn from_csv(path: &str, spec: u8, support: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        let spec = parse_spec(spec)?;
        let support = parse_support(support)?;
        let inner = condpanel::io::load_panel(std::path::Path::new(path), spec, &support)
            .map_err(value_error)?;
        Ok(PyPanelDataset { inner })
    }

    /// Simulate a panel from a JSON DGP config string.
    #[staticmethod]
    fn simulate(config_json: &str) -> PyResult<Self> {
        let cfg = condpanel::io::parse_dgp_config(config_json).map_err(value_error)?;
        let inner = simulate_panel(&cfg).map_err(value_error)?;
        Ok(PyPanelDataset { inner })
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    #[getter]
    fn spec(&self) -> u8 {
        self.inner.spec.tag()
    }

    #[getter]
    fn support(&self) -> Vec<String> {
        self.inner
            .support
            .values()
            .iter()
            .map(rational_to_string)
            .collect()
    }

    fn to_csv_string(&self) -> String {
        condpanel::io::panel_to_csv_string(&self.inner)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        condpanel::io::write_panel(&self.inner, std::path::Path::new(path)).map_err(value_error)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "PanelDataset(spec={}, N={}, T={}, support=[{}])",
            self.inner.spec.tag(),
            self.inner.n(),
            self.inner.horizon,
            self.support().join(", ")
        )
    }
}

/// Decide which components of (rho, beta) are identified for a model class.
#[pyfunction]
#[pyo3(signature = (spec, t, support, criterion = "span"))]
fn check_identification<'py>(
    py: Python<'py>,
    spec: u8,
    t: usize,
    support: Vec<Bound<'py, PyAny>>,
    criterion: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = parse_spec(spec)?;
    let support = parse_support(support)?;
    let criterion = Criterion::from_token(criterion)
        .ok_or_else(|| PyValueError::new_err("criterion must be 'per-stat' or 'span'"))?;
    let report = check_identification_rs(t, &support, spec, criterion).map_err(value_error)?;
    json_to_py(py, &identification_payload(&report))
}

/// Identification restricted to the blocks realized in a sample.
#[pyfunction]
fn dataset_identification<'py>(
    py: Python<'py>,
    dataset: &PyPanelDataset,
) -> PyResult<Bound<'py, PyAny>> {
    let report = dataset_identification_rs(&dataset.inner).map_err(value_error)?;
    json_to_py(py, &identification_payload(&report))
}

fn fit_options(tol: f64, max_iter: usize, box_bound: f64, start: (f64, f64)) -> FitOptions {
    FitOptions {
        tol,
        max_iter,
        box_bound,
        start: Theta::new(start.0, start.1),
    }
}

/// Maximize the conditional log-likelihood over the identified components.
#[pyfunction]
#[pyo3(signature = (dataset, tol = 1e-10, max_iter = 100, box_bound = 20.0, start = (0.0, 0.0)))]
fn fit_cmle<'py>(
    py: Python<'py>,
    dataset: &PyPanelDataset,
    tol: f64,
    max_iter: usize,
    box_bound: f64,
    start: (f64, f64),
) -> PyResult<Bound<'py, PyAny>> {
    let opts = fit_options(tol, max_iter, box_bound, start);
    match fit_cmle_rs(&dataset.inner, &opts) {
        Ok(fit) => json_to_py(py, &fit_payload(&fit, &dataset.inner)),
        Err(e @ EstimationError::NotConverged(_)) => Err(PyRuntimeError::new_err(e.to_string())),
        Err(e) => Err(value_error(e)),
    }
}

/// Profile the conditional log-likelihood in one component over a grid.
#[pyfunction]
#[pyo3(signature = (dataset, component, grid, tol = 1e-10))]
fn profile(
    dataset: &PyPanelDataset,
    component: &str,
    grid: Vec<f64>,
    tol: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let component = Component::from_token(component)
        .ok_or_else(|| PyValueError::new_err("component must be 'rho' or 'beta'"))?;
    let opts = FitOptions {
        tol,
        ..FitOptions::default()
    };
    profile_with_options(&dataset.inner, component, &grid, &opts).map_err(value_error)
}

/// Conditional log-likelihood of the dataset at (rho, beta).
#[pyfunction]
fn cond_log_lik(dataset: &PyPanelDataset, rho: f64, beta: f64) -> PyResult<f64> {
    let ctx = CondLikContext::for_dataset(&dataset.inner).map_err(value_error)?;
    Ok(ctx.log_lik(Theta::new(rho, beta)))
}

/// Analytic score (gradient) at (rho, beta).
#[pyfunction]
fn score(dataset: &PyPanelDataset, rho: f64, beta: f64) -> PyResult<(f64, f64)> {
    let ctx = CondLikContext::for_dataset(&dataset.inner).map_err(value_error)?;
    let g = ctx.score(Theta::new(rho, beta));
    Ok((g[0], g[1]))
}

/// Analytic Hessian at (rho, beta), row-major.
#[pyfunction]
fn hessian(dataset: &PyPanelDataset, rho: f64, beta: f64) -> PyResult<((f64, f64), (f64, f64))> {
    let ctx = CondLikContext::for_dataset(&dataset.inner).map_err(value_error)?;
    let h = ctx.hessian(Theta::new(rho, beta));
    Ok(((h[0][0], h[0][1]), (h[1][0], h[1][1])))
}

/// Monte Carlo study: repeated simulate + fit from a JSON DGP config.
#[pyfunction]
#[pyo3(signature = (config_json, reps, tol = 1e-10))]
fn monte_carlo<'py>(
    py: Python<'py>,
    config_json: &str,
    reps: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = condpanel::io::parse_dgp_config(config_json).map_err(value_error)?;
    let opts = FitOptions {
        tol,
        ..FitOptions::default()
    };
    let summary = monte_carlo_rs(&cfg, reps, &opts).map_err(value_error)?;
    json_to_py(py, &monte_carlo_payload(&summary))
}

#[pymodule]
fn condpanel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPanelDataset>()?;
    m.add_function(wrap_pyfunction!(check_identification, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_identification, m)?)?;
    m.add_function(wrap_pyfunction!(fit_cmle, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(cond_log_lik, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(hessian, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
