//! Python bindings for `hele_homog`. Structured results come back as plain
//! dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use hele_homog::barriers::{self, BoundaryData, RadialContracting};
use hele_homog::geometry::ConeGeometry;
use hele_homog::homog1d::{self, Side};
use hele_homog::hs2d::{self, SimConfig};
use hele_homog::medium::MediumSpec;
use hele_homog::timescale::{self, SubScaling, SuperScaling, ThetaShift};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_side(side: &str) -> PyResult<Side> {
    side.parse().map_err(PyValueError::new_err)
}

/// A periodic medium `g(x, t)`, from an expression or a builtin name.
#[pyclass(name = "Medium", module = "hele_homog_py", frozen)]
struct PyMedium {
    inner: hele_homog::Medium,
}

#[pymethods]
impl PyMedium {
    #[new]
    #[pyo3(signature = (expr, dim = 1))]
    fn new(expr: &str, dim: usize) -> PyResult<Self> {
        let inner = hele_homog::Medium::parse(expr, dim).map_err(value_err)?;
        Ok(PyMedium { inner })
    }

    /// `builtin:NAME`, a bare builtin name, or an expression in one dimension.
    #[staticmethod]
    fn resolve(reference: &str) -> PyResult<Self> {
        let inner = MediumSpec::resolve(reference).map_err(value_err)?;
        Ok(PyMedium { inner })
    }

    #[staticmethod]
    fn constant(c: f64) -> Self {
        PyMedium {
            inner: hele_homog::Medium::constant(c),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn source(&self) -> String {
        self.inner.source().to_string()
    }

    fn is_time_independent(&self) -> bool {
        self.inner.is_time_independent()
    }

    #[pyo3(signature = (x, t = 0.0))]
    fn __call__(&self, x: Vec<f64>, t: f64) -> f64 {
        self.inner.eval(&x, t)
    }

    #[pyo3(signature = (resolution = 64))]
    fn bounds<'py>(&self, py: Python<'py>, resolution: usize) -> PyResult<Bound<'py, PyAny>> {
        let b = self.inner.estimate_bounds(resolution).map_err(value_err)?;
        to_py(py, &b)
    }

    #[pyo3(signature = (trials = 1000, seed = 0))]
    fn check_periodicity<'py>(&self, py: Python<'py>, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.check_periodicity(trials, seed))
    }

    fn __repr__(&self) -> String {
        format!("Medium({:?}, dim={})", self.inner.source(), self.inner.dim())
    }
}

#[pyfunction]
#[pyo3(signature = (medium, q, t_end = 200.0, x0 = 0.0))]
fn effective_velocity<'py>(
    py: Python<'py>,
    medium: &PyMedium,
    q: f64,
    t_end: f64,
    x0: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let est = py
        .detach(|| homog1d::effective_velocity(&medium.inner, q, t_end, x0))
        .map_err(value_err)?;
    to_py(py, &est)
}

#[pyfunction]
#[pyo3(signature = (medium, q_min, q_max, samples = 20, t_end = 200.0))]
fn velocity_curve<'py>(
    py: Python<'py>,
    medium: &PyMedium,
    q_min: f64,
    q_max: f64,
    samples: usize,
    t_end: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let curve = py
        .detach(|| homog1d::velocity_curve(&medium.inner, q_min, q_max, samples, t_end))
        .map_err(value_err)?;
    to_py(py, &curve.points)
}

/// Closed-form velocity of a time-independent 1D medium.
#[pyfunction]
fn harmonic_mean_oracle(medium: &PyMedium, q: f64) -> PyResult<f64> {
    homog1d::harmonic_mean_oracle(&medium.inner, q).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (medium, q, r, eps, side, t_end = 1.0, dt = None))]
#[allow(clippy::too_many_arguments)]
fn obstacle_front<'py>(
    py: Python<'py>,
    medium: &PyMedium,
    q: f64,
    r: f64,
    eps: f64,
    side: &str,
    t_end: f64,
    dt: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let side = parse_side(side)?;
    let dt = dt.unwrap_or(eps / 20.0);
    let (front, flat) = py
        .detach(|| homog1d::obstacle_front(&medium.inner, q, r, eps, side, t_end, dt))
        .map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("front", to_py(py, &front)?)?;
    out.set_item("flatness", to_py(py, &flat)?)?;
    Ok(out.into_any())
}

#[pyfunction]
#[pyo3(signature = (medium, q, beta = 0.9, eps_list = vec![0.1, 0.05, 0.02], t_end = 1.0, resolution = 64))]
fn homogenized_candidates<'py>(
    py: Python<'py>,
    medium: &PyMedium,
    q: f64,
    beta: f64,
    eps_list: Vec<f64>,
    t_end: f64,
    resolution: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let c = py
        .detach(|| {
            let bounds = medium.inner.estimate_bounds(resolution).map_err(|e| e.to_string())?;
            homog1d::homogenized_candidates(&medium.inner, &bounds, q, beta, &eps_list, t_end)
                .map_err(|e| e.to_string())
        })
        .map_err(PyValueError::new_err)?;
    to_py(py, &c)
}

/// Cone angles and vertex speeds for the slope `q` and speed `r` in a medium
/// with bounds `[m, M]`.
#[pyfunction]
#[pyo3(signature = (q, r, m, big_m, rays = 0))]
fn cone_geometry<'py>(
    py: Python<'py>,
    q: Vec<f64>,
    r: f64,
    m: f64,
    big_m: f64,
    rays: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let g = ConeGeometry::new(&q, r, m, big_m).map_err(value_err)?;
    let out = to_py(py, &g.record())?;
    out.set_item("vertex_plus_0", g.vertex_plus(0.0))?;
    out.set_item("vertex_minus_0", g.vertex_minus(0.0))?;
    let waves = PyDict::new(py);
    for xi in g.sample_rays(rays) {
        let (plus, minus) = g.matching_waves(&xi).map_err(value_err)?;
        waves.set_item(format!("{xi:?}"), (to_py(py, &plus)?, to_py(py, &minus)?))?;
    }
    out.set_item("matching_waves", waves)?;
    Ok(out)
}

#[pyfunction]
fn lambert_w0(x: f64) -> PyResult<f64> {
    timescale::lambert_w0(x).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (t, alpha, gamma, lam = 0.0))]
fn f_sub(t: f64, alpha: f64, gamma: f64, lam: f64) -> PyResult<(f64, f64)> {
    let s = SubScaling::new(alpha, gamma, lam).map_err(value_err)?;
    Ok((s.eval(t).map_err(value_err)?, s.derivative(t).map_err(value_err)?))
}

#[pyfunction]
#[pyo3(signature = (t, alpha, gamma, lam = 0.0))]
fn f_super(t: f64, alpha: f64, gamma: f64, lam: f64) -> PyResult<(f64, f64)> {
    let s = SuperScaling::new(alpha, gamma, lam).map_err(value_err)?;
    Ok((s.eval(t).map_err(value_err)?, s.derivative(t).map_err(value_err)?))
}

#[pyfunction]
fn super_t_max(alpha: f64, gamma: f64, lam: f64) -> PyResult<f64> {
    Ok(SuperScaling::new(alpha, gamma, lam).map_err(value_err)?.t_max())
}

#[pyfunction]
#[pyo3(signature = (t, gamma, lam))]
fn theta_shift(t: f64, gamma: f64, lam: f64) -> PyResult<(f64, f64)> {
    let s = ThetaShift::new(gamma, lam).map_err(value_err)?;
    Ok((s.eval(t).map_err(value_err)?, s.derivative(t).map_err(value_err)?))
}

/// `(radius(t), value(x, t))` of the expanding radial barrier.
#[pyfunction]
fn expanding_barrier(n: usize, m: f64, k: f64, a: f64, x: Vec<f64>, t: f64) -> PyResult<(f64, f64)> {
    let b = barriers::expanding_barrier(n, m, k, a).map_err(value_err)?;
    if x.len() != n {
        return Err(PyValueError::new_err(format!("x has length {}, expected {n}", x.len())));
    }
    Ok((b.radius(t), b.eval(&x, t)))
}

/// Radius of the contracting barrier with constant boundary data `k` at `t`.
#[pyfunction]
fn contracting_radius(n: usize, big_m: f64, mu: f64, k: f64, t: f64) -> PyResult<f64> {
    let c = RadialContracting::new(n, big_m, mu, BoundaryData::constant(k)).map_err(value_err)?;
    c.radius(t).map_err(value_err)
}

#[pyfunction]
fn contracting_t0(n: usize, big_m: f64, mu: f64, k: f64) -> PyResult<f64> {
    let c = RadialContracting::new(n, big_m, mu, BoundaryData::constant(k)).map_err(value_err)?;
    Ok(c.t0())
}

/// `(phi, laplacian)` of the thin-cylinder function.
#[pyfunction]
fn thin_cylinder_phi(r: f64, xn: f64, n: usize) -> (f64, f64) {
    barriers::thin_cylinder_phi(r, xn, n)
}

/// Runs the strip simulator. `config` takes the same keys as the JSON config
/// file, without `version`.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &Bound<'py, PyDict>) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (config,))?.extract()?;
    let cfg: SimConfig = serde_json::from_str(&text).map_err(value_err)?;
    let result = py
        .detach(|| hs2d::simulate(&cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &result)
}

/// Runs the command-line tool in process. Returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> (i32, String, String) {
    py.detach(|| {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("hele-homog".to_string()).chain(args);
        let code = hele_homog::cli::dispatch_to(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8_lossy(&out).into_owned(),
            String::from_utf8_lossy(&err).into_owned(),
        )
    })
}

#[pymodule]
fn hele_homog_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMedium>()?;
    m.add_function(wrap_pyfunction!(effective_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(velocity_curve, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_mean_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(obstacle_front, m)?)?;
    m.add_function(wrap_pyfunction!(homogenized_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(cone_geometry, m)?)?;
    m.add_function(wrap_pyfunction!(lambert_w0, m)?)?;
    m.add_function(wrap_pyfunction!(f_sub, m)?)?;
    m.add_function(wrap_pyfunction!(f_super, m)?)?;
    m.add_function(wrap_pyfunction!(super_t_max, m)?)?;
    m.add_function(wrap_pyfunction!(theta_shift, m)?)?;
    m.add_function(wrap_pyfunction!(expanding_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(contracting_radius, m)?)?;
    m.add_function(wrap_pyfunction!(contracting_t0, m)?)?;
    m.add_function(wrap_pyfunction!(thin_cylinder_phi, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
