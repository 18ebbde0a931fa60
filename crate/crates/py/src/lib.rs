//! Python module `symreg`: error laws, fits, tests and Monte Carlo studies.
//! Matrices cross the boundary as lists of rows; structured results come
//! back as plain dicts.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use symreg_core::bootstrap::bootstrap_test;
use symreg_core::design::DesignPartition;
use symreg_core::distribution::{self as dist, DistributionKernel};
use symreg_core::estimate::{FitOptions, Fitter, ModelSpec};
use symreg_core::inference::TestContext;
use symreg_core::simulation::{power_study, size_study, SimDesign};
use symreg_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::NotConverged(_) | Error::TooManyFailures { .. } | Error::Quadrature { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// serde value → Python object through the standard json module.
fn to_object<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n == 0 || p == 0 {
        return Err(PyValueError::new_err("design matrix is empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(PyValueError::new_err(format!("row {i} has {} entries, expected {p}", rows[i].len())));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn model_spec(y: Vec<f64>, x: &[Vec<f64>], tested: &[usize], null: &[f64], family: dist::Family, log: bool) -> PyResult<ModelSpec> {
    let x = matrix(x)?;
    if y.len() != x.nrows() {
        return Err(PyValueError::new_err(format!("y has {} entries, x has {} rows", y.len(), x.nrows())));
    }
    let part = DesignPartition::new(x, tested, null).map_err(to_py)?;
    if log {
        ModelSpec::log_symmetric(&y, part, family).map_err(to_py)
    } else {
        ModelSpec::new(DVector::from_vec(y), part, family).map_err(to_py)
    }
}

/// A standardised symmetric error law, e.g. `Family("student-t:4")`.
#[pyclass(name = "Family", frozen)]
struct PyFamily {
    kernel: DistributionKernel,
}

#[pymethods]
impl PyFamily {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let f: dist::Family = spec.parse().map_err(to_py)?;
        Ok(PyFamily {
            kernel: dist::kernel(f).map_err(to_py)?,
        })
    }

    fn __str__(&self) -> String {
        self.kernel.family.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Family('{}')", self.kernel.family)
    }

    fn density(&self, z: f64) -> f64 {
        self.kernel.density(z)
    }

    fn weight(&self, z: f64) -> f64 {
        self.kernel.weight(z)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.kernel.cdf(x).map_err(to_py)
    }

    /// Variance of the law, or None where it does not exist.
    #[getter]
    fn variance(&self) -> Option<f64> {
        self.kernel.xi()
    }

    /// Closed-form or tabulated δ constants.
    fn deltas<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &dist::delta_constants(self.kernel.family).map_err(to_py)?)
    }

    /// The same δ constants recomputed by adaptive quadrature.
    fn oracle_deltas<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &dist::oracle_deltas(self.kernel.family).map_err(to_py)?)
    }

    fn correction_constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &dist::correction_constants(self.kernel.family).map_err(to_py)?)
    }

    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = symreg_core::rng::stream(seed, 0);
        dist::sample(self.kernel.family, &mut r, n)
    }
}

/// Maximum likelihood fit.
#[pyclass(name = "Fit", frozen, get_all)]
struct PyFit {
    beta: Vec<f64>,
    std_errors: Vec<f64>,
    phi: f64,
    phi_std_error: f64,
    /// On the scale of the response as given.
    loglik: f64,
    iterations: usize,
    converged: bool,
    degenerate: bool,
}

#[pymethods]
impl PyFit {
    fn __repr__(&self) -> String {
        format!(
            "Fit(beta={:?}, phi={}, loglik={}, converged={})",
            self.beta,
            self.phi,
            self.loglik,
            if self.converged { "True" } else { "False" }
        )
    }
}

/// Fits y = Xβ + φε (or log y with `log=True`). `x` is a list of rows.
#[pyfunction]
#[pyo3(signature = (y, x, family="normal", log=false))]
fn fit(y: Vec<f64>, x: Vec<Vec<f64>>, family: &str, log: bool) -> PyResult<PyFit> {
    let family: dist::Family = family.parse().map_err(to_py)?;
    let spec = model_spec(y, &x, &[0], &[0.0], family, log)?;
    let fitter = Fitter::for_spec(&spec, FitOptions::default()).map_err(to_py)?;
    let f = fitter.fit(&spec.y).map_err(to_py)?;
    let (se, se_phi) = fitter.standard_errors(&f);
    Ok(PyFit {
        beta: spec.partition.to_caller_order(&f.beta).as_slice().to_vec(),
        std_errors: spec.partition.to_caller_order(&se).as_slice().to_vec(),
        phi: f.phi,
        phi_std_error: se_phi,
        loglik: f.loglik + spec.log_jacobian(),
        iterations: f.iterations,
        converged: f.converged,
        degenerate: f.degenerate,
    })
}

/// Tests H₀: β[tested] = null. Returns a dict with the seven statistics,
/// their χ² p-values, the correction coefficients and, with `boot`, the
/// bootstrap p-values.
#[pyfunction]
#[pyo3(signature = (y, x, tested, null=None, family="normal", log=false, boot=None, seed=0, force=false))]
#[allow(clippy::too_many_arguments)]
fn test<'py>(
    py: Python<'py>,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    tested: Vec<usize>,
    null: Option<Vec<f64>>,
    family: &str,
    log: bool,
    boot: Option<usize>,
    seed: u64,
    force: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let family: dist::Family = family.parse().map_err(to_py)?;
    let null = null.unwrap_or_else(|| vec![0.0; tested.len()]);
    let spec = model_spec(y, &x, &tested, &null, family, log)?;
    let ctx = TestContext::for_spec(&spec, FitOptions::default()).map_err(to_py)?;
    let (u, r) = py.detach(|| ctx.fits(&spec.y)).map_err(to_py)?;
    let report = ctx.report(&u, &r, force).map_err(to_py)?;
    let out = to_object(py, &report)?;
    if let Some(b) = boot.filter(|b| *b > 0) {
        let raw = ctx.raw(&u, &r, force).map_err(to_py)?;
        let set = py.detach(|| bootstrap_test(&ctx, &r, &raw, b, seed)).map_err(to_py)?;
        let d = PyDict::new(py);
        for s in set.as_array() {
            d.set_item(&s.statistic, s.pvalue)?;
        }
        d.set_item("failed", set.failed)?;
        out.set_item("bootstrap", d)?;
    }
    Ok(out)
}

fn design(config: &str) -> PyResult<SimDesign> {
    let d: SimDesign = toml::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    d.validate().map_err(to_py)?;
    Ok(d)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> PyResult<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Null rejection rates for a design given as TOML text.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn simulate_size<'py>(py: Python<'py>, config: &str, threads: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let d = design(config)?;
    let res = py.detach(|| in_pool(threads, || size_study(&d)))?.map_err(to_py)?;
    to_object(py, &res)
}

/// Size-corrected power curve for a design given as TOML text.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn simulate_power<'py>(py: Python<'py>, config: &str, threads: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let d = design(config)?;
    let res = py.detach(|| in_pool(threads, || power_study(&d)))?.map_err(to_py)?;
    to_object(py, &res)
}

/// Column names of the size tables, in order.
#[pyfunction]
fn table_columns() -> Vec<&'static str> {
    symreg_core::simulation::COLUMNS.to_vec()
}

#[pymodule]
pub fn symreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyFamily>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(test, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_size, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_power, m)?)?;
    m.add_function(wrap_pyfunction!(table_columns, m)?)?;
    Ok(())
}

