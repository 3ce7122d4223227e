//! Python bindings for `shrinkflow`.
//!
//! Structured results (spectra, gap choices, audit reports) come back as
//! plain dictionaries decoded from the crate's JSON documents.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use clap::Parser;
use shrinkflow::cli::{self, Cli, EXIT_USAGE};
use shrinkflow::drift_heat;
use shrinkflow::error::Error;
use shrinkflow::flow::{self, FlowConfig, Trajectory};
use shrinkflow::shrinker::Shrinker;
use shrinkflow::spectral;

fn to_py(err: Error) -> PyErr {
    if cli::exit_code(&err) == EXIT_USAGE {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn shrinker(n: usize) -> PyResult<Shrinker> {
    Shrinker::new(n).map_err(to_py)
}

fn default_cutoff(n: usize) -> usize {
    if n == 1 {
        spectral::DEFAULT_CIRCLE_LEVELS
    } else {
        spectral::DEFAULT_SPHERE_LEVELS
    }
}

/// Eigenvalues of `−L` on the round shrinker of dimension `n`, in order,
/// for the first `cutoff` distinct levels.
#[pyfunction]
#[pyo3(signature = (n, cutoff = None))]
fn eigenvalues(n: usize, cutoff: Option<usize>) -> PyResult<Vec<f64>> {
    let s = spectral::build_spectrum(&shrinker(n)?, cutoff.unwrap_or(default_cutoff(n)))
        .map_err(to_py)?;
    Ok(s.eigenvalues().to_vec())
}

/// The spectrum document (levels, labels, Weyl fit).
#[pyfunction]
#[pyo3(signature = (n, cutoff = None))]
fn spectrum<'py>(py: Python<'py>, n: usize, cutoff: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let s = spectral::build_spectrum(&shrinker(n)?, cutoff.unwrap_or(default_cutoff(n)))
        .map_err(to_py)?;
    json_to_py(py, &s.to_json())
}

/// Gaussian area of the shrinker itself.
#[pyfunction]
fn gaussian_area(n: usize) -> PyResult<f64> {
    Ok(shrinker(n)?.gaussian_area())
}

/// Growth threshold for the unit-time dichotomy.
#[pyfunction]
#[pyo3(signature = (n, cutoff = None))]
fn certified_delta(n: usize, cutoff: Option<usize>) -> PyResult<f64> {
    let s = spectral::build_spectrum(&shrinker(n)?, cutoff.unwrap_or(default_cutoff(n)))
        .map_err(to_py)?;
    Ok(drift_heat::certified_delta(&s))
}

/// Scale `L`, exponent `B` and the eigenvalue gap for given `L₀`, `C₀`.
#[pyfunction]
#[pyo3(signature = (n, l0 = 0.4, c0 = 2.0, cutoff = None))]
fn choose_gap<'py>(
    py: Python<'py>,
    n: usize,
    l0: f64,
    c0: f64,
    cutoff: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let s = spectral::build_spectrum(&shrinker(n)?, cutoff.unwrap_or(default_cutoff(n)))
        .map_err(to_py)?;
    let choice = drift_heat::choose_gap_l(&s, l0, c0).map_err(to_py)?;
    json_to_py(
        py,
        &serde_json::to_value(choice).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    )
}

/// Evolve an initial graph (`"zero"`, `"mode k=2 amp=1e-3"`, ...) and return
/// the sampled columns of the trajectory.
#[pyfunction]
#[pyo3(signature = (n = 1, initial = "mode k=2 amp=1e-3", tau_end = 3.0, dtau = 1e-3, sample_dtau = 0.01))]
fn evolve<'py>(
    py: Python<'py>,
    n: usize,
    initial: &str,
    tau_end: f64,
    dtau: f64,
    sample_dtau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = shrinker(n)?;
    let spec = cli::InitialSpec::parse(initial).map_err(to_py)?;
    let graph = spec.build(s, s.default_grid_spec()).map_err(to_py)?;
    let mut config = FlowConfig::for_shrinker(&s);
    config.dtau = dtau;
    config.validate().map_err(to_py)?;
    let traj = py
        .detach(|| flow::run(&graph, &config, tau_end, sample_dtau))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("tau", traj.taus())?;
    out.set_item("distance", traj.distances())?;
    out.set_item(
        "excess",
        traj.states.iter().map(|s| s.excess).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "unstable_fraction",
        traj.states
            .iter()
            .map(|s| s.unstable_fraction)
            .collect::<Vec<_>>(),
    )?;
    out.set_item("halted_at", traj.step_log.halted_at)?;
    Ok(out)
}

/// `ln(D(τ)/D(τ+1))` for a sampled distance curve.
#[pyfunction]
fn decay_order(taus: Vec<f64>, distances: Vec<f64>, tau: f64) -> PyResult<f64> {
    let traj = Trajectory::from_distances(&taus, &distances).map_err(to_py)?;
    flow::decay_order(&traj, tau).map_err(to_py)
}

/// Run the command-line interface in-process; returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> PyResult<i32> {
    let argv = std::iter::once("shrinkflow".to_string()).chain(args);
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => return Err(PyValueError::new_err(e.to_string())),
    };
    Ok(match py.detach(|| cli::execute(&parsed)) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => cli::exit_code(&e),
    })
}

#[pymodule]
fn shrinkflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_area, m)?)?;
    m.add_function(wrap_pyfunction!(certified_delta, m)?)?;
    m.add_function(wrap_pyfunction!(choose_gap, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(decay_order, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
