//! Python bindings for the ISABC workbench.

use isabc_core::beampattern::{joint_beampattern, rx_beampattern, tx_beampattern, AngleGrid, Pattern};
use isabc_core::benchmarks::{verify_solution, VERIFY_TOL};
use isabc_core::channel::{stream_rng, trial_seed};
use isabc_core::harness::experiment::draw_channels;
use isabc_core::harness::ExperimentConfig;
use isabc_core::metrics::{eh_forward, eh_inverse, incident_power, noise_power_dbm, sensing_sinr, tag_sinr, user_sinr, NoiseSpec};
use isabc_core::{BeamformingSolution, ChannelSet, Error, MetricsReport, Scheme, SchemeConfig};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Infeasible(_) | Error::NoFeasibleCandidate => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<SchemeConfig> {
    name.parse::<Scheme>().map(SchemeConfig::new).map_err(to_py)
}

fn vec_of(v: &isabc_core::linalg::CVec) -> Vec<Complex64> {
    v.iter().copied().collect()
}

/// Experiment configuration: reference-scenario defaults overridden by `key = value` text.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        ExperimentConfig::parse(text).map(Self).map_err(to_py)
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.0.set(key, value).map_err(to_py)?;
        self.0.validate().map_err(to_py)
    }

    fn render(&self) -> String {
        self.0.render()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn trials(&self) -> usize {
        self.0.trials
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.0.params().sigma2
    }

    /// Channel realization of trial `trial`, identical to the one the harness uses.
    fn channels(&self, trial: u64) -> PyResult<PyChannel> {
        draw_channels(&self.0, trial_seed(self.0.base_seed, trial)).map(PyChannel).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Config(m={}, n={}, k={}, trials={})", self.0.m, self.0.n, self.0.k, self.0.trials)
    }
}

#[pyclass(name = "Channel", from_py_object)]
#[derive(Clone)]
struct PyChannel(ChannelSet);

#[pymethods]
impl PyChannel {
    #[getter]
    fn num_tx(&self) -> usize {
        self.0.num_tx()
    }

    #[getter]
    fn num_rx(&self) -> usize {
        self.0.num_rx()
    }

    #[getter]
    fn num_tags(&self) -> usize {
        self.0.num_tags()
    }

    /// Tag angles in radians.
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.theta.clone()
    }

    #[getter]
    fn f(&self) -> Vec<Complex64> {
        vec_of(&self.0.f)
    }

    #[getter]
    fn g_f(&self) -> Vec<Vec<Complex64>> {
        self.0.g_f.iter().map(vec_of).collect()
    }

    #[getter]
    fn g_b(&self) -> Vec<Vec<Complex64>> {
        self.0.g_b.iter().map(vec_of).collect()
    }

    #[getter]
    fn v(&self) -> Vec<Complex64> {
        self.0.v.clone()
    }

    fn without_tags(&self) -> Self {
        Self(self.0.without_tags())
    }

    fn __repr__(&self) -> String {
        format!("Channel(M={}, N={}, K={})", self.0.num_tx(), self.0.num_rx(), self.0.num_tags())
    }
}

fn pattern_lists(p: Pattern) -> (Vec<f64>, Vec<f64>) {
    p.into_iter().unzip()
}

#[pyclass(name = "Solution", from_py_object)]
#[derive(Clone)]
struct PySolution(BeamformingSolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn w(&self) -> Vec<Complex64> {
        vec_of(&self.0.w)
    }

    /// Dedicated sensing covariance, row by row.
    #[getter]
    fn s(&self) -> Vec<Vec<Complex64>> {
        self.0.s.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<Complex64>> {
        self.0.u.iter().map(vec_of).collect()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.0.alpha.clone()
    }

    fn transmit_power(&self) -> f64 {
        self.0.transmit_power()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self(self.0.scaled(factor))
    }

    /// `(angles, gain)` of the transmit pattern, angles in radians over [-pi/2, pi/2].
    #[pyo3(signature = (step_deg = 0.5))]
    fn tx_beampattern(&self, step_deg: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let grid = AngleGrid::broadside(step_deg).map_err(to_py)?;
        Ok(pattern_lists(tx_beampattern(&self.0, &grid, self.0.w.len())))
    }

    #[pyo3(signature = (k, step_deg = 0.5))]
    fn rx_beampattern(&self, k: usize, step_deg: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let grid = AngleGrid::broadside(step_deg).map_err(to_py)?;
        let n = self.0.u.get(k).map_or(0, |u| u.len());
        rx_beampattern(&self.0, k, &grid, n).map(pattern_lists).map_err(to_py)
    }

    #[pyo3(signature = (k, step_deg = 0.5))]
    fn joint_beampattern(&self, k: usize, step_deg: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let grid = AngleGrid::broadside(step_deg).map_err(to_py)?;
        joint_beampattern(&self.0, k, &grid).map(pattern_lists).map_err(to_py)
    }

    /// SINRs and incident powers of this solution on `channel`.
    fn evaluate<'py>(&self, py: Python<'py>, channel: &PyChannel, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
        if channel.0.num_tags() != self.0.alpha.len() || channel.0.num_tx() != self.0.w.len() {
            return Err(PyValueError::new_err("solution and channel dimensions differ"));
        }
        let p = config.0.params();
        let (ch, sol) = (&channel.0, &self.0);
        let k = sol.alpha.len();
        let d = PyDict::new(py);
        d.set_item("user_sinr", user_sinr(ch, sol, p.sigma2))?;
        d.set_item("tag_sinr", (0..k).map(|i| tag_sinr(ch, sol, i, p.sigma2)).collect::<Vec<_>>())?;
        d.set_item(
            "sensing_sinr",
            (0..k).map(|i| sensing_sinr(ch, sol, i, p.sigma2, p.thresholds.lambda_si)).collect::<Vec<_>>(),
        )?;
        d.set_item("incident_power", (0..k).map(|i| incident_power(ch, sol, i)).collect::<Vec<_>>())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Solution(power={:.4e} W, alpha={:?})", self.0.transmit_power(), self.0.alpha)
    }
}

#[pyclass(name = "Report", from_py_object)]
#[derive(Clone)]
struct PyReport(MetricsReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn power_w(&self) -> f64 {
        self.0.power_w
    }

    #[getter]
    fn power_dbm(&self) -> f64 {
        self.0.power_dbm
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.0.objective_trace.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn feasible(&self) -> bool {
        self.0.feasible
    }

    #[getter]
    fn user_rate(&self) -> f64 {
        self.0.rates.user_rate
    }

    #[getter]
    fn tag_rates(&self) -> Vec<f64> {
        self.0.rates.tag_rates.clone()
    }

    #[getter]
    fn sensing_rates(&self) -> Vec<f64> {
        self.0.rates.sensing_rates.clone()
    }

    #[getter]
    fn stage_ms(&self) -> [f64; 3] {
        self.0.stage_ms
    }

    fn __repr__(&self) -> String {
        format!("Report(power={:.3} dBm, iterations={}, feasible={})", self.0.power_dbm, self.0.iterations, self.0.feasible)
    }
}

/// Solves trial `trial` of `config` with `scheme` under perfect CSI.
#[pyfunction]
#[pyo3(signature = (config, scheme = "isabc-p", trial = 0))]
fn solve(py: Python<'_>, config: &PyConfig, scheme: &str, trial: u64) -> PyResult<(PyChannel, PySolution, PyReport)> {
    let sc = self::scheme(scheme)?;
    let cfg = config.0.clone();
    py.detach(move || {
        let seed = trial_seed(cfg.base_seed, trial);
        let ch = draw_channels(&cfg, seed)?;
        let mut rng = stream_rng(seed, 1);
        let (sol, _, report) = isabc_core::run_scheme(&sc, &ch, &cfg.params(), &cfg.ao_config(), &mut rng)?;
        Ok((PyChannel(ch), PySolution(sol), PyReport(report)))
    })
    .map_err(to_py)
}

/// Whether `solution` meets every constraint `scheme` enforces on `channel`.
#[pyfunction]
fn verify(channel: &PyChannel, solution: &PySolution, scheme: &str, config: &PyConfig) -> PyResult<bool> {
    let sc = self::scheme(scheme)?;
    let mut params = config.0.params();
    let ch = if sc.drops_tags() {
        params.thresholds.gamma_t.clear();
        params.thresholds.upsilon.clear();
        channel.0.without_tags()
    } else {
        channel.0.clone()
    };
    Ok(verify_solution(&ch, &solution.0, &sc, &params, VERIFY_TOL))
}

/// Runs a full experiment, writing its files to the config's `out_dir`.
/// Returns `(exit_code, summary_text)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &PyConfig) -> PyResult<(i32, String)> {
    let cfg = config.0.clone();
    let out = py.detach(move || isabc_core::harness::run_experiment(&cfg)).map_err(to_py)?;
    Ok((out.exit_code, out.summary))
}

#[pyfunction]
fn schemes() -> Vec<&'static str> {
    Scheme::ALL.iter().map(|s| s.name()).collect()
}

/// Harvested power (W) for incident power `p` (W) under the config's EH model.
#[pyfunction(name = "eh_forward")]
fn py_eh_forward(config: &PyConfig, p: f64) -> f64 {
    eh_forward(p, &config.0.params().eh)
}

#[pyfunction(name = "eh_inverse")]
fn py_eh_inverse(config: &PyConfig, p_target: f64) -> PyResult<f64> {
    eh_inverse(p_target, &config.0.params().eh).map_err(to_py)
}

/// Noise power in dBm for the given bandwidth and noise figure.
#[pyfunction(name = "noise_power_dbm")]
#[pyo3(signature = (bandwidth_hz = 10e6, noise_figure_db = 10.0))]
fn py_noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    noise_power_dbm(&NoiseSpec { bandwidth_hz, noise_figure_db, ..NoiseSpec::default() })
}

#[pymodule]
fn isabc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(schemes, m)?)?;
    m.add_function(wrap_pyfunction!(py_eh_forward, m)?)?;
    m.add_function(wrap_pyfunction!(py_eh_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(py_noise_power_dbm, m)?)?;
    Ok(())
}
