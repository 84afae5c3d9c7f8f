//! Python bindings for `mpiga`.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mpiga::adapt::{self, AdaptiveState, LoopSettings, RefinementMode};
use mpiga::app::{self, Config};
use mpiga::basis::{nullspace_basis, verify_basis, GlobalBasis};
use mpiga::coupling::build_constraints;
use mpiga::geometry::{validate_assumptions, MultiPatch};
use mpiga::problems::{builtin_problem, BUILTIN_PROBLEMS};
use mpiga::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Precondition(_) | Error::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<RefinementMode> {
    match mode {
        "adaptive" => Ok(RefinementMode::Adaptive),
        "uniform" => Ok(RefinementMode::Uniform),
        _ => Err(PyValueError::new_err(format!("mode must be 'adaptive' or 'uniform', got '{mode}'"))),
    }
}

/// Run configuration, as read from a `key = value` file.
#[pyclass(name = "Config", module = "mpiga_py")]
struct PyConfig {
    inner: Config,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (problem, degree = 2))]
    fn new(problem: &str, degree: usize) -> PyResult<Self> {
        let inner = Config::new(problem, degree);
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Config::parse(text).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Config::from_file(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn problem(&self) -> String {
        self.inner.problem.clone()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[setter]
    fn set_theta(&mut self, v: f64) -> PyResult<()> {
        self.update(|c| c.theta = v)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.name()
    }

    #[setter]
    fn set_mode(&mut self, v: &str) -> PyResult<()> {
        let m = parse_mode(v)?;
        self.update(|c| c.mode = m)
    }

    #[getter]
    fn max_dof(&self) -> usize {
        self.inner.max_dof
    }

    #[setter]
    fn set_max_dof(&mut self, v: usize) -> PyResult<()> {
        self.update(|c| c.max_dof = v)
    }

    #[getter]
    fn max_levels(&self) -> usize {
        self.inner.max_levels
    }

    #[setter]
    fn set_max_levels(&mut self, v: usize) -> PyResult<()> {
        self.update(|c| c.max_levels = v)
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, v: PathBuf) -> PyResult<()> {
        self.update(|c| c.output_dir = v)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

impl PyConfig {
    fn update(&mut self, f: impl FnOnce(&mut Config)) -> PyResult<()> {
        let mut c = self.inner.clone();
        f(&mut c);
        c.validate().map_err(py_err)?;
        self.inner = c;
        Ok(())
    }
}

/// A multi-patch discretization.
#[pyclass(name = "MultiPatch", module = "mpiga_py")]
struct PyMultiPatch {
    inner: MultiPatch,
}

#[pymethods]
impl PyMultiPatch {
    /// Initial discretization of a built-in problem's geometry.
    #[staticmethod]
    #[pyo3(signature = (problem, degree = 2, spans = 4))]
    fn from_problem(problem: &str, degree: usize, spans: u32) -> PyResult<Self> {
        let p = builtin_problem(problem).map_err(py_err)?;
        p.geometry.multipatch(degree, spans).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn num_patches(&self) -> usize {
        self.inner.num_patches()
    }

    #[getter]
    fn num_patchwise_dofs(&self) -> usize {
        self.inner.num_patchwise_dofs()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.topology.edges.len()
    }

    #[getter]
    fn num_t_junctions(&self) -> usize {
        self.inner.topology.t_junctions().count()
    }

    fn levels(&self) -> Vec<u32> {
        self.inner.patches.iter().map(|p| p.level).collect()
    }

    /// Splits exactly the given patches.
    fn split(&self, patches: Vec<usize>) -> PyResult<Self> {
        let set: BTreeSet<usize> = patches.into_iter().collect();
        self.inner.split_patches(&set).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Splits the given patches plus the level-balance closure.
    fn refine(&self, marked: Vec<usize>) -> PyResult<Self> {
        let set: BTreeSet<usize> = marked.into_iter().collect();
        adapt::refine(&self.inner, &set).map(|inner| Self { inner }).map_err(py_err)
    }

    fn refine_uniformly(&self) -> PyResult<Self> {
        self.inner.refine_spaces_uniformly().map(|inner| Self { inner }).map_err(py_err)
    }

    /// Violated assumptions, one message each.
    fn validate(&self, degree: usize) -> Vec<String> {
        validate_assumptions(&self.inner, degree).violations.iter().map(|v| v.to_string()).collect()
    }

    /// Physical point of patch-local parameter `(u, v)`.
    fn eval(&self, patch: usize, u: f64, v: f64) -> PyResult<(f64, f64)> {
        if patch >= self.inner.num_patches() {
            return Err(PyValueError::new_err(format!("patch {patch} does not exist")));
        }
        let p = self.inner.eval_map(patch, [u, v]).point;
        Ok((p[0], p[1]))
    }

    /// Sampled knot lines and patch boundaries as lists of points.
    fn polylines(&self) -> Vec<Vec<(f64, f64)>> {
        app::output::mesh_polylines(&self.inner)
            .into_iter()
            .map(|l| l.points.into_iter().map(|p| (p[0], p[1])).collect())
            .collect()
    }

    fn basis(&self) -> PyResult<PyGlobalBasis> {
        let cm = build_constraints(&self.inner).map_err(py_err)?;
        let basis = nullspace_basis(&cm).map_err(py_err)?;
        let report = verify_basis(&cm.c, &basis.b).map_err(py_err)?;
        Ok(PyGlobalBasis { basis, passes: report.passes(), summary: report.to_string() })
    }
}

/// Conforming basis `B` mapping global to patch-wise coefficients.
#[pyclass(name = "GlobalBasis", module = "mpiga_py")]
struct PyGlobalBasis {
    basis: GlobalBasis,
    #[pyo3(get)]
    passes: bool,
    #[pyo3(get)]
    summary: String,
}

#[pymethods]
impl PyGlobalBasis {
    #[getter]
    fn n_global(&self) -> usize {
        self.basis.n_global()
    }

    #[getter]
    fn n_patchwise(&self) -> usize {
        self.basis.n_patchwise()
    }

    /// Non-zeros of `B` as `(row, column, value)`.
    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.basis.b.triplets().collect()
    }

    fn to_patchwise(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.basis.to_patchwise(&u).map_err(py_err)
    }
}

/// One level of a refinement study.
#[pyclass(name = "Level", module = "mpiga_py", get_all)]
struct PyLevel {
    level: usize,
    n_dof: usize,
    n_global: usize,
    n_patchwise: usize,
    n_patches: usize,
    h1_error: Option<f64>,
    l2_error: Option<f64>,
    estimator: f64,
    eta_sq: Vec<f64>,
    solver_iters: usize,
}

impl From<&AdaptiveState> for PyLevel {
    fn from(s: &AdaptiveState) -> Self {
        Self {
            level: s.level,
            n_dof: s.n_dof,
            n_global: s.n_global,
            n_patchwise: s.mp.num_patchwise_dofs(),
            n_patches: s.mp.num_patches(),
            h1_error: s.errors.map(|e| e.h1_semi),
            l2_error: s.errors.map(|e| e.l2),
            estimator: s.eta.total,
            eta_sq: s.eta.eta_sq.clone(),
            solver_iters: s.solve.iterations,
        }
    }
}

#[pymethods]
impl PyLevel {
    fn __repr__(&self) -> String {
        format!(
            "Level(level={}, n_dof={}, n_patches={}, estimator={:e})",
            self.level, self.n_dof, self.n_patches, self.estimator
        )
    }
}

/// Runs the solve-estimate-mark-refine loop without writing files.
#[pyfunction]
#[pyo3(signature = (problem, degree = 2, mode = "adaptive", theta = 0.5, max_dof = 5000, max_levels = 10))]
fn refinement_study(
    py: Python<'_>,
    problem: &str,
    degree: usize,
    mode: &str,
    theta: f64,
    max_dof: usize,
    max_levels: usize,
) -> PyResult<Vec<PyLevel>> {
    let p = builtin_problem(problem).map_err(py_err)?;
    let mut s = LoopSettings::new(degree);
    s.mode = parse_mode(mode)?;
    s.theta = theta;
    s.max_dof = max_dof;
    s.max_levels = max_levels;
    let run = py.detach(|| adapt::adaptive_loop(&p, &s));
    if let Some(e) = run.failure {
        return Err(py_err(e));
    }
    Ok(run.history.iter().map(PyLevel::from).collect())
}

/// Dörfler marking: minimal set covering `theta` of the squared total.
#[pyfunction]
fn mark(eta_sq: Vec<f64>, theta: f64) -> PyResult<Vec<usize>> {
    adapt::mark(&eta_sq, theta).map(|m| m.into_iter().collect()).map_err(py_err)
}

/// Runs a configured study and writes its output files; returns the number
/// of levels.
#[pyfunction]
fn run(py: Python<'_>, config: &PyConfig) -> PyResult<usize> {
    let c = config.inner.clone();
    py.detach(|| app::run(&c, &mut std::io::sink())).map(|s| s.levels).map_err(py_err)
}

/// Runs the invariant suite; returns `(level, check, passed, detail)` rows.
#[pyfunction]
fn verify(py: Python<'_>, config: &PyConfig) -> PyResult<Vec<(usize, String, bool, String)>> {
    let c = config.inner.clone();
    let outcomes = py.detach(|| app::verify(&c, &mut std::io::sink())).map_err(py_err)?;
    Ok(outcomes.into_iter().map(|o| (o.level, o.name.to_string(), o.passed, o.detail)).collect())
}

#[pymodule]
fn mpiga_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyMultiPatch>()?;
    m.add_class::<PyGlobalBasis>()?;
    m.add_class::<PyLevel>()?;
    m.add_function(wrap_pyfunction!(refinement_study, m)?)?;
    m.add_function(wrap_pyfunction!(mark, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("BUILTIN_PROBLEMS", BUILTIN_PROBLEMS.to_vec())?;
    Ok(())
}
