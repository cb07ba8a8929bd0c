//! Python bindings for `cajsim`.
//!
//! Matrices cross the boundary as lists of rows of Python `complex`.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cajsim::analysis::{self, AnalyticInputs};
use cajsim::caj::{self, Method};
use cajsim::channel::FadingSpec;
use cajsim::estimator::{self, EstimationResult};
use cajsim::harness;
use cajsim::mathcore::ComplexMatrix;
use cajsim::signal;
use cajsim::CajError;

type Rows = Vec<Vec<Complex64>>;

fn py_err(e: CajError) -> PyErr {
    match e {
        CajError::Config(_) => PyValueError::new_err(e.to_string()),
        CajError::Io { .. } | CajError::Csv { .. } => PyOSError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn to_rows(m: &ComplexMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &Rows) -> PyResult<ComplexMatrix> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(PyValueError::new_err("matrix rows must have equal length"));
    }
    Ok(ComplexMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

fn parse_method(name: &str) -> PyResult<Method> {
    name.parse().map_err(py_err)
}

#[pyclass(name = "FrameConfig", module = "cajsim_py", skip_from_py_object)]
#[derive(Clone)]
struct PyFrameConfig {
    inner: signal::FrameConfig,
}

#[pymethods]
impl PyFrameConfig {
    #[new]
    #[pyo3(signature = (k=4, n_tp=50, k_t=1, k_j=1, n_td=1000, gamma_ts_db=10.0, gamma_tj_db=40.0,
                        noise_variance=1.0, gamma_th_db=-10.0, tau_h=0.0, tau_g=0.0, freeze_pilots=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        k: usize,
        n_tp: usize,
        k_t: usize,
        k_j: usize,
        n_td: usize,
        gamma_ts_db: f64,
        gamma_tj_db: f64,
        noise_variance: f64,
        gamma_th_db: f64,
        tau_h: f64,
        tau_g: f64,
        freeze_pilots: bool,
    ) -> PyResult<Self> {
        let fading = |tau: f64| if tau > 0.0 { FadingSpec::jakes(tau) } else { FadingSpec::block() };
        let inner = signal::FrameConfig {
            k,
            k_t,
            k_j,
            n_tp,
            n_td,
            gamma_ts_db,
            gamma_tj_db,
            noise_variance,
            gamma_th_db,
            fading_h: fading(tau_h),
            fading_g: fading(tau_g),
            freeze_pilots,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }
    #[getter]
    fn k_t(&self) -> usize {
        self.inner.k_t
    }
    #[getter]
    fn k_j(&self) -> usize {
        self.inner.k_j
    }
    #[getter]
    fn n_tp(&self) -> usize {
        self.inner.n_tp
    }
    #[getter]
    fn n_td(&self) -> usize {
        self.inner.n_td
    }
    #[getter]
    fn gamma_ts_db(&self) -> f64 {
        self.inner.gamma_ts_db
    }
    #[getter]
    fn gamma_tj_db(&self) -> f64 {
        self.inner.gamma_tj_db
    }

    /// Non-fatal configuration warnings.
    fn warnings(&self) -> PyResult<Vec<String>> {
        self.inner.validate().map_err(py_err)
    }

    fn pilots(&self) -> PyResult<Rows> {
        let s = signal::make_pilots(self.inner.n_tp, self.inner.k_t, self.inner.ts_power()).map_err(py_err)?;
        Ok(to_rows(&s))
    }

    /// Draws one frame from a seeded generator.
    #[pyo3(signature = (seed, noiseless=false))]
    fn draw(&self, seed: u64, noiseless: bool) -> PyResult<PyFrame> {
        let mut src = signal::FrameSource::new(&self.inner).map_err(py_err)?;
        if noiseless {
            src = src.without_noise();
        }
        let frame = src.draw(&mut ChaCha8Rng::seed_from_u64(seed)).map_err(py_err)?;
        Ok(PyFrame {
            cfg: self.inner.clone(),
            frame,
        })
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "FrameConfig(k={}, n_tp={}, k_t={}, k_j={}, n_td={}, gamma_ts_db={}, gamma_tj_db={})",
            c.k, c.n_tp, c.k_t, c.k_j, c.n_td, c.gamma_ts_db, c.gamma_tj_db
        )
    }
}

#[pyclass(name = "Frame", module = "cajsim_py")]
struct PyFrame {
    cfg: signal::FrameConfig,
    frame: signal::Frame,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn y_tp(&self) -> Rows {
        to_rows(&self.frame.y_tp)
    }
    #[getter]
    fn y_td(&self) -> Rows {
        to_rows(&self.frame.y_td)
    }
    #[getter]
    fn pilots(&self) -> Rows {
        to_rows(&self.frame.pilots)
    }
    /// True jamming channels at the first symbol, one list per jammer.
    #[getter]
    fn jamming_channels(&self) -> Vec<Vec<Complex64>> {
        self.frame.truth.g.iter().map(|g| g.at(0).iter().copied().collect()).collect()
    }
    #[getter]
    fn data_indices(&self) -> Vec<Vec<u8>> {
        self.frame.truth.data_indices.clone()
    }

    /// Runs estimation, projection and detection with `method`.
    fn run(&self, py: Python<'_>, method: &str) -> PyResult<Py<PyDict>> {
        let out = caj::run_pipeline(&self.cfg, &self.frame, parse_method(method)?).map_err(py_err)?;
        let d = &out.diagnostics;
        let dict = PyDict::new(py);
        dict.set_item("detected", out.detected.clone())?;
        dict.set_item("soft", to_rows(&out.soft))?;
        dict.set_item("symbol_errors", d.symbol_errors)?;
        dict.set_item("symbols", d.symbols)?;
        dict.set_item("ser", d.ser())?;
        dict.set_item("angle_deg", d.angle_deg)?;
        dict.set_item("msad", d.msad)?;
        dict.set_item("jam_leak", d.jam_leak)?;
        dict.set_item("residual_jam_fraction", d.residual_jam_fraction)?;
        dict.set_item("f_norm2", d.f_norm2)?;
        Ok(dict.unbind())
    }
}

fn estimation_dict(py: Python<'_>, est: &EstimationResult) -> PyResult<Py<PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("g_hat", to_rows(&est.g_hat_dirs))?;
    dict.set_item("g_perp", to_rows(&est.g_perp))?;
    dict.set_item("residual_energy", est.residual_energy)?;
    Ok(dict.unbind())
}

/// Subspace estimate of `k_j` jamming directions from the pilot block.
#[pyfunction]
#[pyo3(signature = (y_tp, pilots, k_j=1))]
fn ev_estimate(py: Python<'_>, y_tp: Rows, pilots: Rows, k_j: usize) -> PyResult<Py<PyDict>> {
    let est = estimator::multi_jam_estimate(&from_rows(&y_tp)?, &from_rows(&pilots)?, k_j).map_err(py_err)?;
    estimation_dict(py, &est)
}

#[pyfunction]
fn nls_estimate(py: Python<'_>, y_tp: Rows, pilots: Rows) -> PyResult<Py<PyDict>> {
    let basis = estimator::PilotBasis::new(&from_rows(&pilots)?).map_err(py_err)?;
    let est = estimator::nls_estimate_with(&from_rows(&y_tp)?, &basis).map_err(py_err)?;
    estimation_dict(py, &est)
}

/// Outage probability for effective SNR scale `beta`.
#[pyfunction]
fn outage_analytical(k: usize, beta: f64, gamma_th: f64) -> PyResult<f64> {
    analysis::outage_analytical(k, beta, gamma_th).map_err(py_err)
}

/// `beta` for an isotropically spread jammer under `cfg`.
#[pyfunction]
fn beta_isotropic(cfg: &PyFrameConfig, method: &str) -> PyResult<f64> {
    analysis::beta(&AnalyticInputs::isotropic(&cfg.inner), parse_method(method)?).map_err(py_err)
}

#[pyfunction]
fn complexity(method: &str, k: u64, k_j: u64, n_tp: u64, n_td: u64) -> PyResult<i64> {
    analysis::complexity_nrm(parse_method(method)?, k, k_j, n_tp, n_td).map_err(py_err)
}

#[pyfunction]
fn list_scenarios() -> Vec<&'static str> {
    harness::scenario_ids()
}

/// Runs a catalog scenario and returns its CSV rows as dictionaries.
#[pyfunction]
#[pyo3(signature = (scenario, trials=None, seed=None, workers=1, series=None, sweep_values=None))]
fn run_scenario(
    py: Python<'_>,
    scenario: &str,
    trials: Option<u64>,
    seed: Option<u64>,
    workers: usize,
    series: Option<Vec<String>>,
    sweep_values: Option<Vec<f64>>,
) -> PyResult<Vec<Py<PyDict>>> {
    let mut sc = harness::find_scenario(scenario).map_err(py_err)?;
    if let Some(t) = trials {
        sc = sc.with_trials(t).map_err(py_err)?;
    }
    if let Some(s) = seed {
        sc = sc.with_seed(s);
    }
    if let Some(labels) = series {
        let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
        sc = sc.with_series(&labels).map_err(py_err)?;
    }
    if let Some(values) = sweep_values {
        sc = sc.with_sweep_values(values).map_err(py_err)?;
    }
    let out = py.detach(|| harness::run_scenario(&sc, workers)).map_err(py_err)?;
    out.records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scenario", &r.scenario)?;
            d.set_item("method", &r.method)?;
            d.set_item("sweep_name", &r.sweep_name)?;
            d.set_item("sweep_value", r.sweep_value)?;
            d.set_item("metric", &r.metric)?;
            d.set_item("value", r.value)?;
            d.set_item("trials", r.trials)?;
            d.set_item("seed", r.seed)?;
            Ok(d.unbind())
        })
        .collect()
}

#[pymodule]
fn cajsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrameConfig>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(ev_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(nls_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(outage_analytical, m)?)?;
    m.add_function(wrap_pyfunction!(beta_isotropic, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
