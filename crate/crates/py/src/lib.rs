//! Python bindings: run trials and experiments and call the statistics
//! directly. Structured results cross the boundary as JSON and arrive in
//! Python as plain dicts and lists.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use steer_sim::harness::{self, ExperimentConfig};
use steer_sim::metrics::compute_metrics;
use steer_sim::stats::{self, ComparisonPolicy, Sample};
use steer_sim::Error;

create_exception!(
    steersim,
    DivergenceError,
    PyException,
    "The simulation produced a non-finite or runaway state."
);
create_exception!(
    steersim,
    StatsError,
    PyException,
    "A statistical test could not be computed."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => PyValueError::new_err(e.to_string()),
        Error::Divergence { .. } | Error::NonFinite { .. } => DivergenceError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => StatsError::new_err(e.to_string()),
    }
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn load_config(config_toml: Option<&str>, seed: Option<u64>) -> PyResult<ExperimentConfig> {
    let mut config = match config_toml {
        Some(text) => ExperimentConfig::from_toml_str(text).map_err(to_py)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate().map_err(to_py)?;
    Ok(config)
}

/// The built-in default configuration as TOML text.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_toml().map_err(to_py)
}

/// Runs one subject (1-based) in one condition (1–7). Returns a dict with
/// `metrics` and `trace` (a dict of column lists).
#[pyfunction]
#[pyo3(signature = (condition, subject = 1, seed = None, config_toml = None))]
fn run_trial(
    py: Python<'_>,
    condition: u8,
    subject: usize,
    seed: Option<u64>,
    config_toml: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let config = load_config(config_toml, seed)?;
    let cond = harness::condition(condition).map_err(to_py)?;
    let plan = harness::build_plan(config.seed, &config).map_err(to_py)?;
    let profile = subject
        .checked_sub(1)
        .and_then(|i| plan.subjects.get(i))
        .ok_or_else(|| PyValueError::new_err(format!("subject must be in 1..={}", plan.subjects.len())))?;
    let trace = py
        .detach(|| harness::run_trial(&cond, profile, &config))
        .map_err(to_py)?;
    let epoch = match config.epoch {
        harness::Epoch::Spawn => 0.0,
        harness::Epoch::TrialStart => -trace.event_time,
    };
    let metrics = compute_metrics(&trace, epoch).map_err(to_py)?;

    let mut columns = serde_json::Map::new();
    for name in steer_sim::metrics::TRACE_COLUMNS {
        columns.insert(name.to_string(), serde_json::Value::Array(Vec::new()));
    }
    for sample in &trace.samples {
        let row = serde_json::to_value(sample).map_err(|e| PyValueError::new_err(e.to_string()))?;
        if let serde_json::Value::Object(fields) = row {
            for (k, v) in fields {
                if let Some(serde_json::Value::Array(col)) = columns.get_mut(&k) {
                    col.push(v);
                }
            }
        }
    }
    let result = serde_json::json!({
        "trial_id": trace.trial_id,
        "event_time": trace.event_time,
        "analysis_end": trace.analysis_end,
        "metrics": metrics,
        "trace": columns,
    });
    json_to_py(py, &result)
}

/// Runs the full experiment. Returns the per-trial records, the
/// significance targets and the ordering checks; with `out_dir`, also
/// writes every output file there.
#[pyfunction]
#[pyo3(signature = (seed = None, jobs = 1, config_toml = None, out_dir = None))]
fn run_experiment(
    py: Python<'_>,
    seed: Option<u64>,
    jobs: usize,
    config_toml: Option<&str>,
    out_dir: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let config = load_config(config_toml, seed)?;
    let run = py
        .detach(|| {
            let plan = harness::build_plan(config.seed, &config)?;
            let run = harness::run_experiment(&plan, &config, jobs)?;
            if let Some(dir) = &out_dir {
                harness::emit_outputs(&run.report, &run.traces, dir)?;
            }
            Ok::<_, Error>(run)
        })
        .map_err(to_py)?;
    let report = &run.report;
    let result = serde_json::json!({
        "master_seed": report.master_seed,
        "config_hash": report.config_hash,
        "records": report.records,
        "failures": report.failures,
        "targets": report.targets,
        "orderings": report.orderings,
        "table2": report.table2,
    });
    json_to_py(py, &result)
}

fn sample(label: &str, values: Vec<f64>) -> Sample {
    Sample::new(label, values)
}

/// Shapiro–Wilk normality test; returns `(W, p)`.
#[pyfunction]
fn shapiro_wilk(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::shapiro_wilk(&sample("x", values)).map_err(to_py)?;
    Ok((r.statistic, r.p_value))
}

/// Wilcoxon signed-rank test on paired samples; returns `(T+, p)`.
#[pyfunction]
fn wilcoxon(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::wilcoxon_signed_rank(&sample("x", x), &sample("y", y)).map_err(to_py)?;
    Ok((r.statistic, r.p_value))
}

/// Full test-selection chain; returns the chosen test with its provenance.
#[pyfunction]
#[pyo3(signature = (x, y, alpha = 0.05))]
fn compare(py: Python<'_>, x: Vec<f64>, y: Vec<f64>, alpha: f64) -> PyResult<Py<PyAny>> {
    let policy = ComparisonPolicy { alpha };
    policy.validate().map_err(to_py)?;
    let r = stats::compare_groups(&sample("x", x), &sample("y", y), &policy).map_err(to_py)?;
    json_to_py(py, &r)
}

/// Balanced Latin square over `1..=n`.
#[pyfunction]
fn latin_square(n: usize) -> Vec<Vec<usize>> {
    harness::latin_square(n)
}

#[pymodule]
fn steersim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add("StatsError", m.py().get_type::<StatsError>())?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(shapiro_wilk, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(latin_square, m)?)?;
    Ok(())
}
