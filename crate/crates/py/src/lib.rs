//! Python module `defk`. Structured results come back as plain dicts and
//! lists; representations are wrapped in a `Representation` class.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use defk_core::hn_strata::{self, HnType};
use defk_core::kcalc;
use defk_core::lattice::{build_complex, flat_from_rep, holonomy_rep};
use defk_core::presentation::make_presentation;
use defk_core::rep_variety::{self, ConnectOptions};
use defk_core::{Error, FlowOptions, SurfaceKind, C64};

create_exception!(defk, NonConvergenceError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    if e.is_non_convergence() {
        NonConvergenceError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn surface(s: &str) -> PyResult<SurfaceKind> {
    s.parse().map_err(py_err)
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_bound_py_any(py),
            (None, Some(u)) => u.into_bound_py_any(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// A point of Hom(pi_1 M, U(n)).
#[pyclass(name = "Representation", module = "defk", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRepresentation {
    inner: rep_variety::Representation,
}

#[pymethods]
impl PyRepresentation {
    /// Haar-random images (not flat).
    #[staticmethod]
    fn haar(surface_name: &str, n: usize, seed: u64) -> PyResult<Self> {
        let p = make_presentation(surface(surface_name)?).map_err(py_err)?;
        Ok(Self {
            inner: rep_variety::Representation::haar(p, n, seed),
        })
    }

    /// Builds a representation from one n x n complex matrix (list of rows) per generator.
    #[staticmethod]
    fn from_images(surface_name: &str, images: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let p = make_presentation(surface(surface_name)?).map_err(py_err)?;
        let mats = images
            .into_iter()
            .map(|rows| {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(PyValueError::new_err("images must be square"));
                }
                let m = defk_core::CMatrix::from_fn(n, n, |i, j| rows[i][j]);
                defk_core::Unitary::new(m).map_err(py_err)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: rep_variety::Representation::new(p, mats).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("representations serialize")
    }

    #[getter]
    fn surface(&self) -> String {
        self.inner.presentation().kind().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.rank()
    }

    /// Generator images as nested lists of complex numbers.
    fn images(&self) -> Vec<Vec<Vec<C64>>> {
        self.inner
            .images()
            .iter()
            .map(|u| {
                let m = u.matrix();
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
            })
            .collect()
    }

    fn residual(&self) -> f64 {
        self.inner.residual()
    }

    fn obstruction(&self) -> PyResult<i8> {
        rep_variety::obstruction(&self.inner).map_err(py_err)
    }

    fn distance(&self, other: &PyRepresentation) -> PyResult<f64> {
        self.inner.distance(&other.inner).map_err(py_err)
    }

    /// Sorted eigenvalues of the default probe words.
    fn fingerprint(&self) -> PyResult<Vec<Vec<C64>>> {
        let probes = rep_variety::default_probe_words(self.inner.presentation());
        rep_variety::fingerprint(&self.inner, &probes).map_err(py_err)
    }

    fn block_sum(&self, other: &PyRepresentation) -> PyResult<Self> {
        rep_variety::block_sum(&self.inner, &other.inner)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Representation(surface={}, n={}, residual={:e})",
            self.surface(),
            self.n(),
            self.residual()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (rep, tol = 1e-8, max_iter = 20_000))]
fn flow_to_flat<'py>(
    py: Python<'py>,
    rep: &PyRepresentation,
    tol: f64,
    max_iter: usize,
) -> PyResult<(PyRepresentation, Bound<'py, PyAny>)> {
    let (inner, report) =
        rep_variety::flow_to_flat_with(&rep.inner, &FlowOptions::new(tol, max_iter), None).map_err(py_err)?;
    Ok((PyRepresentation { inner }, to_py(py, &report)?))
}

#[pyfunction]
#[pyo3(signature = (surface_name, n, seed, tol = 1e-8, max_iter = 20_000))]
fn sample_flat(surface_name: &str, n: usize, seed: u64, tol: f64, max_iter: usize) -> PyResult<PyRepresentation> {
    let p = make_presentation(surface(surface_name)?).map_err(py_err)?;
    rep_variety::sample_flat_with(&p, n, seed, &FlowOptions::new(tol, max_iter))
        .map(|inner| PyRepresentation { inner })
        .map_err(py_err)
}

/// Path between two flat representations; a dict with the waypoint
/// residuals and step lengths plus the waypoints themselves.
#[pyfunction]
#[pyo3(signature = (start, end, waypoints = 9, tol = 1e-8, step_limit = 0.5))]
fn connect_flat<'py>(
    py: Python<'py>,
    start: &PyRepresentation,
    end: &PyRepresentation,
    waypoints: usize,
    tol: f64,
    step_limit: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut opts = ConnectOptions::new(tol);
    opts.step_limit = step_limit;
    let path = rep_variety::connect_flat_with(&start.inner, &end.inner, waypoints, &opts).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("max_residual", path.max_residual)?;
    d.set_item("max_step", path.max_step)?;
    d.set_item("residuals", path.residuals.clone())?;
    d.set_item("steps", path.steps.clone())?;
    let reps: Vec<PyRepresentation> = path
        .waypoints
        .into_iter()
        .map(|inner| PyRepresentation { inner })
        .collect();
    d.set_item("waypoints", reps)?;
    Ok(d)
}

/// Largest entrywise error of holonomy after building the flat lattice
/// connection at subdivision `level`.
#[pyfunction]
#[pyo3(signature = (rep, level = 0))]
fn holonomy_roundtrip(rep: &PyRepresentation, level: u32) -> PyResult<f64> {
    let complex = Arc::new(build_complex(rep.inner.presentation(), level));
    let a = flat_from_rep(&rep.inner, complex).map_err(py_err)?;
    Ok(holonomy_rep(&a).max_entry_diff(&rep.inner))
}

#[pyfunction]
fn min_nonsemistable_codim<'py>(py: Python<'py>, n: i64, genus: i64) -> PyResult<Bound<'py, PyDict>> {
    let m = hn_strata::min_nonsemistable_codim(n, genus).map_err(py_err)?;
    let formula = hn_strata::min_codim_formula(n, genus);
    let d = PyDict::new(py);
    d.set_item("real_codim", m.real_codim)?;
    d.set_item("formula", formula)?;
    d.set_item("match", m.real_codim == formula)?;
    let argmins: Vec<Vec<(i64, i64)>> = m.argmins.iter().map(|t| t.pairs().to_vec()).collect();
    d.set_item("argmins", argmins)?;
    Ok(d)
}

#[pyfunction]
fn codim_complex(pairs: Vec<(i64, i64)>, genus: i64) -> PyResult<i64> {
    let mu = HnType::new(pairs).map_err(py_err)?;
    hn_strata::codim_complex(&mu, genus).map_err(py_err)
}

#[pyfunction]
fn enumerate_admissible(n: i64, genus: i64, max_codim: i64) -> PyResult<Vec<Vec<(i64, i64)>>> {
    Ok(hn_strata::enumerate_admissible(n, genus, max_codim)
        .map_err(py_err)?
        .iter()
        .map(|t| t.pairs().to_vec())
        .collect())
}

#[pyfunction]
fn verify_codim_inequalities<'py>(py: Python<'py>, pairs: Vec<(i64, i64)>) -> PyResult<Bound<'py, PyAny>> {
    let mu = HnType::new(pairs).map_err(py_err)?;
    to_py(py, &hn_strata::verify_codim_inequalities(&mu).map_err(py_err)?)
}

/// Deformation K-group as a string such as `"Z + Z/2"`.
#[pyfunction]
fn kdef_groups(surface_name: &str, degree: u32) -> PyResult<String> {
    Ok(kcalc::kdef_groups(surface(surface_name)?, degree).map_err(py_err)?.to_string())
}

#[pyfunction]
fn k_topological(surface_name: &str, degree: u32) -> PyResult<String> {
    Ok(kcalc::k_topological(surface(surface_name)?, degree).map_err(py_err)?.to_string())
}

#[pyfunction]
#[pyo3(signature = (max_g = 5, max_degree = 7))]
fn kgroups_table<'py>(py: Python<'py>, max_g: u32, max_degree: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &kcalc::kgroups_table(max_g, 0..=max_degree).map_err(py_err)?)
}

#[pyfunction]
fn moduli_homotopy<'py>(py: Python<'py>, surface_name: &str, i: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &kcalc::moduli_homotopy(surface(surface_name)?, i).map_err(py_err)?)
}

#[pyfunction]
fn bott_les_report<'py>(py: Python<'py>, surface_name: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &kcalc::bott_les_report(surface(surface_name)?).map_err(py_err)?)
}

#[pyfunction]
fn excision_counterexample<'py>(py: Python<'py>, g1: u32, g2: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &kcalc::excision_counterexample(g1, g2).map_err(py_err)?)
}

#[pymodule]
fn defk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add_class::<PyRepresentation>()?;
    m.add_function(wrap_pyfunction!(flow_to_flat, m)?)?;
    m.add_function(wrap_pyfunction!(sample_flat, m)?)?;
    m.add_function(wrap_pyfunction!(connect_flat, m)?)?;
    m.add_function(wrap_pyfunction!(holonomy_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(min_nonsemistable_codim, m)?)?;
    m.add_function(wrap_pyfunction!(codim_complex, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_admissible, m)?)?;
    m.add_function(wrap_pyfunction!(verify_codim_inequalities, m)?)?;
    m.add_function(wrap_pyfunction!(kdef_groups, m)?)?;
    m.add_function(wrap_pyfunction!(k_topological, m)?)?;
    m.add_function(wrap_pyfunction!(kgroups_table, m)?)?;
    m.add_function(wrap_pyfunction!(moduli_homotopy, m)?)?;
    m.add_function(wrap_pyfunction!(bott_les_report, m)?)?;
    m.add_function(wrap_pyfunction!(excision_counterexample, m)?)?;
    Ok(())
}
