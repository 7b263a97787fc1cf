use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use narrowflux::asymptotics::{self, ExpansionResult};
use narrowflux::geometry::{validate_config, Role, ValidatedConfig, WindowConfig};
use narrowflux::halfspace::{self, HalfSpaceBc, TraceOptions, TraceSample};
use narrowflux::linsys::{influx_drop, KernelTreatment};
use narrowflux::validators::{bem_solve_extrapolated, mc_flux_split, BemMesh, McConfig};
use narrowflux::ErrorClass;

fn py_err(e: narrowflux::Error) -> PyErr {
    match e.class() {
        ErrorClass::Config => PyValueError::new_err(e.to_string()),
        ErrorClass::Convergence => PyRuntimeError::new_err(e.to_string()),
        ErrorClass::Io => PyOSError::new_err(e.to_string()),
    }
}

/// Terms of a small-window expansion.
#[pyclass(name = "Expansion", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyExpansion {
    leading: f64,
    log_term: f64,
    quad_term: Option<f64>,
    total: f64,
}

impl From<ExpansionResult> for PyExpansion {
    fn from(e: ExpansionResult) -> Self {
        Self {
            leading: e.leading,
            log_term: e.log_term,
            quad_term: e.quad_term,
            total: e.total,
        }
    }
}

#[pymethods]
impl PyExpansion {
    fn __repr__(&self) -> String {
        format!("Expansion(total={}, leading={}, log_term={}, quad_term={:?})", self.total, self.leading, self.log_term, self.quad_term)
    }
}

/// A validated window arrangement, built from JSON text or as a sphere pair.
#[pyclass(name = "WindowConfig", frozen)]
struct PyWindowConfig {
    inner: ValidatedConfig,
}

#[pymethods]
impl PyWindowConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = WindowConfig::from_json(text).map_err(py_err)?;
        Ok(Self {
            inner: validate_config(&cfg).map_err(py_err)?,
        })
    }

    /// Influx at the north pole and one exit at chord distance `l`; `exit` is "neumann" or "absorbing".
    #[staticmethod]
    #[pyo3(signature = (eps, l, exit = "absorbing"))]
    fn sphere_pair(eps: f64, l: f64, exit: &str) -> PyResult<Self> {
        let role = match exit {
            "neumann" => Role::OutfluxNeumann,
            "absorbing" => Role::Absorbing,
            other => return Err(PyValueError::new_err(format!("unknown exit kind {other:?}"))),
        };
        Ok(Self {
            inner: validate_config(&WindowConfig::sphere_pair(eps, l, role)).map_err(py_err)?,
        })
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn n_windows(&self) -> usize {
        self.inner.n_windows()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.config.to_json().map_err(py_err)
    }

    /// `u(x1)`, `ū` and the exit fluxes from the interaction system.
    #[pyo3(signature = (exact_kernels = false))]
    fn solve_linsys(&self, exact_kernels: bool) -> PyResult<(f64, f64, Vec<f64>)> {
        let t = if exact_kernels { KernelTreatment::Exact } else { KernelTreatment::Truncated };
        let (u1, ubar, flux) = influx_drop(&self.inner, t).map_err(py_err)?;
        Ok((u1, ubar, flux.fluxes))
    }

    /// Richardson-extrapolated boundary-element drop and its error estimate.
    #[pyo3(signature = (mesh_level = 1))]
    fn bem_drop(&self, py: Python<'_>, mesh_level: u32) -> PyResult<(f64, f64)> {
        let cfg = self.inner.clone();
        let est = py
            .detach(move || bem_solve_extrapolated(&cfg, &BemMesh::level(mesh_level)))
            .map_err(py_err)?;
        Ok((est.drop, est.error_estimate))
    }

    /// Fractions of particles absorbed by each exit window and their standard errors.
    #[pyo3(signature = (n_particles = 100_000, seed = 0))]
    fn mc_split(&self, py: Python<'_>, n_particles: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let cfg = self.inner.clone();
        let mc = McConfig {
            n_particles,
            master_seed: seed,
            ..McConfig::default()
        };
        let r = py.detach(move || mc_flux_split(&cfg, &mc)).map_err(py_err)?;
        Ok((r.p, r.stderr))
    }

    /// Exit fluxes from the sphere expansion.
    fn asym_fluxes(&self) -> PyResult<Vec<f64>> {
        Ok(asymptotics::sphere_fluxes(self.inner.eps, &self.inner.distances)
            .map_err(py_err)?
            .fluxes)
    }
}

#[pyfunction]
fn sphere_drop_neumann(eps: f64, l: f64) -> PyResult<PyExpansion> {
    Ok(asymptotics::sphere_drop_neumann(eps, l).map_err(py_err)?.into())
}

#[pyfunction]
fn sphere_drop_absorbing(eps: f64, l: f64) -> PyResult<PyExpansion> {
    Ok(asymptotics::sphere_drop_absorbing(eps, l).map_err(py_err)?.into())
}

#[pyfunction]
fn close_window_coefficient(eta: f64) -> PyResult<f64> {
    asymptotics::close_window_coefficient(eta).map_err(py_err)
}

/// Two windows of radius `eps` on a reflecting plane, `l` apart.
#[pyclass(name = "HalfSpacePair", frozen)]
struct PyHalfSpacePair {
    inner: halfspace::HalfSpacePair,
}

#[pyclass(name = "FlowTrace", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyFlowTrace {
    points: Vec<(f64, f64, f64)>,
    l_pe: f64,
    t_tr: f64,
    terminal_x: f64,
}

#[pymethods]
impl PyHalfSpacePair {
    #[new]
    #[pyo3(signature = (eps, l, current = 1.0, bc = "neumann"))]
    fn new(eps: f64, l: f64, current: f64, bc: &str) -> PyResult<Self> {
        let bc: HalfSpaceBc = bc.parse().map_err(py_err)?;
        Ok(Self {
            inner: halfspace::HalfSpacePair::new(eps, l, current, bc).map_err(py_err)?,
        })
    }

    #[getter]
    fn u0(&self) -> f64 {
        self.inner.u0
    }

    fn field(&self, x: f64, y: f64, z: f64) -> PyResult<f64> {
        halfspace::field(&self.inner, x, y, z).map_err(py_err)
    }

    fn grad(&self, x: f64, z: f64) -> PyResult<(f64, f64)> {
        halfspace::grad_field(&self.inner, x, z).map_err(py_err)
    }

    #[pyo3(signature = (rel_tol = 1e-6, max_time = 1e8))]
    fn trace(&self, py: Python<'_>, rel_tol: f64, max_time: f64) -> PyResult<PyFlowTrace> {
        let opts = TraceOptions {
            rel_tol,
            max_time,
            ..TraceOptions::default()
        };
        let p = self.inner;
        let t = py.detach(move || halfspace::trace_flow(&p, &opts)).map_err(py_err)?;
        Ok(PyFlowTrace {
            points: t.points,
            l_pe: t.l_pe,
            t_tr: t.t_tr,
            terminal_x: t.terminal_x,
        })
    }
}

/// Traces the `eps × l` grid and fits `(a, b)`.
#[pyfunction]
#[pyo3(signature = (eps, l, current = 1.0, bc = "neumann"))]
fn fit_penetration(py: Python<'_>, eps: Vec<f64>, l: Vec<f64>, current: f64, bc: &str) -> PyResult<(f64, f64)> {
    let bc: HalfSpaceBc = bc.parse().map_err(py_err)?;
    let samples: Vec<TraceSample> = py
        .detach(move || halfspace::trace_grid(&eps, &l, current, bc, &TraceOptions::default()))
        .map_err(py_err)?;
    let f = halfspace::fit_constants(&samples).map_err(py_err)?;
    Ok((f.a, f.b))
}

#[pymodule]
fn narrowflux_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpansion>()?;
    m.add_class::<PyWindowConfig>()?;
    m.add_class::<PyHalfSpacePair>()?;
    m.add_class::<PyFlowTrace>()?;
    m.add_function(wrap_pyfunction!(sphere_drop_neumann, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_drop_absorbing, m)?)?;
    m.add_function(wrap_pyfunction!(close_window_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(fit_penetration, m)?)?;
    Ok(())
}
