//! Python bindings for the LEO cooperative-beamforming simulator.
//!
//! The module mirrors the `leocoop` CLI surface: build or load an
//! [`ExperimentConfig`], run seeded Monte-Carlo trials, sweep a parameter,
//! and run the built-in validation suite. Per-frame results come back as
//! plain dictionaries so they drop straight into pandas or csv.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use leocoop::harness::{
    self, AggregateRow, ExperimentConfig, FrameRow, Scheme, SweepParam,
};

fn err(e: leocoop::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Flat experiment configuration shared by every entry point.
#[pyclass(name = "ExperimentConfig", module = "leocoop", skip_from_py_object)]
#[derive(Clone)]
pub struct PyExperimentConfig {
    inner: ExperimentConfig,
}

macro_rules! forward_fields {
    ($($field:ident : $ty:ty),* $(,)?) => {
        paste::paste! {
            #[pymethods]
            impl PyExperimentConfig {
                $(
                    #[getter]
                    fn $field(&self) -> $ty {
                        self.inner.$field.clone()
                    }
                    #[setter]
                    fn [<set_ $field>](&mut self, value: $ty) {
                        self.inner.$field = value;
                    }
                )*
            }
        }
    };
}

forward_fields!(
    walker_planes: usize,
    walker_sats_per_plane: usize,
    inclination_deg: f64,
    altitude_km: f64,
    carrier_freq_ghz: f64,
    bandwidth_mhz: f64,
    noise_psd_dbm_per_hz: f64,
    noise_figure_db: f64,
    num_sats: usize,
    num_users: usize,
    upa_nh: usize,
    upa_nv: usize,
    u_max: usize,
    p_rad_dbm: f64,
    p_ho_dbm: f64,
    tau_ho: f64,
    rate_min_bps_hz: f64,
    num_frames: usize,
    frame_duration_s: f64,
    service_center_lat_deg: f64,
    service_center_lon_deg: f64,
    user_spread_rad: f64,
    min_elevation_deg: f64,
    rician_k_min_db: f64,
    rician_k_max_db: f64,
    seed: u64,
    n_trials: usize,
    timing: bool,
);

#[pymethods]
impl PyExperimentConfig {
    /// Small configuration meant for quick runs (4 satellites, 6 users).
    #[staticmethod]
    fn desk() -> Self {
        Self {
            inner: ExperimentConfig::desk(),
        }
    }

    /// Full reference configuration (8 satellites, 12 users, 4x4 arrays).
    #[new]
    fn new() -> Self {
        Self {
            inner: ExperimentConfig::default(),
        }
    }

    /// Parses a flat `key = value` configuration file.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_file(&path).map_err(err)?,
        })
    }

    /// Parses flat `key = value` configuration text.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_str(text).map_err(err)?,
        })
    }

    #[getter]
    fn schemes(&self) -> Vec<String> {
        self.inner
            .schemes
            .iter()
            .map(|s| s.name().to_string())
            .collect()
    }

    #[setter]
    fn set_schemes(&mut self, names: Vec<String>) -> PyResult<()> {
        self.inner.schemes = names
            .iter()
            .map(|n| Scheme::parse(n).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(())
    }

    /// Raises ValueError when any field is out of range.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(num_sats={}, num_users={}, upa={}x{}, rate_min={}, \
             n_trials={}, seed={}, schemes={:?})",
            self.inner.num_sats,
            self.inner.num_users,
            self.inner.upa_nh,
            self.inner.upa_nv,
            self.inner.rate_min_bps_hz,
            self.inner.n_trials,
            self.inner.seed,
            self.schemes(),
        )
    }
}

fn frame_row_dict<'py>(py: Python<'py>, r: &FrameRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("trial", r.trial)?;
    d.set_item("frame", r.frame)?;
    d.set_item("scheme", &r.scheme)?;
    d.set_item("status", &r.status)?;
    d.set_item("power_w", r.power_w)?;
    d.set_item("ho_power_w", r.ho_power_w)?;
    d.set_item("ho_events", r.ho_events)?;
    d.set_item("min_rate", r.min_rate)?;
    d.set_item("solve_ms", r.solve_ms)?;
    Ok(d)
}

fn aggregate_row_dict<'py>(py: Python<'py>, r: &AggregateRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("param", &r.param)?;
    d.set_item("value", r.value)?;
    d.set_item("scheme", &r.scheme)?;
    d.set_item("mean_power_w", r.mean_power_w)?;
    d.set_item("feasibility_rate", r.feasibility_rate)?;
    d.set_item("mean_ho_events", r.mean_ho_events)?;
    d.set_item("n_feasible", r.n_feasible)?;
    Ok(d)
}

fn rows_to_list<'py>(py: Python<'py>, rows: &[FrameRow]) -> PyResult<Bound<'py, PyList>> {
    let list = PyList::empty(py);
    for r in rows {
        list.append(frame_row_dict(py, r)?)?;
    }
    Ok(list)
}

fn aggs_to_list<'py>(py: Python<'py>, rows: &[AggregateRow]) -> PyResult<Bound<'py, PyList>> {
    let list = PyList::empty(py);
    for r in rows {
        list.append(aggregate_row_dict(py, r)?)?;
    }
    Ok(list)
}

/// Runs all Monte-Carlo trials of `config`; returns one dict per
/// `(trial, frame, scheme)`. With `out_dir` set, also writes `frames.csv`
/// and `aggregate.csv` there.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
fn simulate<'py>(
    py: Python<'py>,
    config: &PyExperimentConfig,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyList>> {
    let rows = py
        .detach(|| harness::run_trials(&config.inner))
        .map_err(err)?;
    if let Some(dir) = out_dir {
        let aggregates = harness::aggregate(&rows, "none", 0.0);
        harness::emit_csv(&rows, &aggregates, &dir).map_err(err)?;
    }
    rows_to_list(py, &rows)
}

/// Runs one seeded trial of `config`; returns one dict per frame and scheme.
#[pyfunction]
fn run_scenario<'py>(
    py: Python<'py>,
    config: &PyExperimentConfig,
    trial: usize,
) -> PyResult<Bound<'py, PyList>> {
    let rows = py
        .detach(|| harness::run_scenario(&config.inner, trial))
        .map_err(err)?;
    rows_to_list(py, &rows)
}

/// Re-runs the trials at each value of `param` (`rate_min`, `num_users`,
/// `num_sats`, or `p_ho_dbm`). Returns `(frame_rows, aggregate_rows)`; with
/// `out_dir` set, also writes both CSV files there.
#[pyfunction]
#[pyo3(signature = (config, param, values, trials, out_dir=None))]
fn sweep<'py>(
    py: Python<'py>,
    config: &PyExperimentConfig,
    param: &str,
    values: Vec<f64>,
    trials: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<(Bound<'py, PyList>, Bound<'py, PyList>)> {
    let p = SweepParam::parse(param).map_err(err)?;
    let (frames, aggregates) = py
        .detach(|| harness::sweep(&config.inner, p, &values, trials))
        .map_err(err)?;
    if let Some(dir) = out_dir {
        harness::emit_csv(&frames, &aggregates, &dir).map_err(err)?;
    }
    Ok((rows_to_list(py, &frames)?, aggs_to_list(py, &aggregates)?))
}

/// Runs the cross-module invariant suite at fixed seeds; returns one dict
/// per check. `fast` skips the Monte-Carlo and end-to-end checks.
#[pyfunction]
#[pyo3(signature = (fast=false))]
fn validate<'py>(py: Python<'py>, fast: bool) -> PyResult<Bound<'py, PyList>> {
    let results = py.detach(|| harness::validate(fast));
    let list = PyList::empty(py);
    for c in &results {
        let d = PyDict::new(py);
        d.set_item("name", &c.name)?;
        d.set_item("passed", c.passed)?;
        d.set_item("detail", &c.detail)?;
        d.set_item("wall_ms", c.wall_ms)?;
        list.append(d)?;
    }
    Ok(list)
}

/// Renders frame rows back into the canonical `frames.csv` text.
#[pyfunction]
fn frames_csv(rows: Vec<Bound<'_, PyDict>>) -> PyResult<String> {
    let parsed: Vec<FrameRow> = rows
        .iter()
        .map(|d| {
            Ok(FrameRow {
                trial: d.get_item("trial")?.unwrap().extract()?,
                frame: d.get_item("frame")?.unwrap().extract()?,
                scheme: d.get_item("scheme")?.unwrap().extract()?,
                status: d.get_item("status")?.unwrap().extract()?,
                power_w: d.get_item("power_w")?.unwrap().extract()?,
                ho_power_w: d.get_item("ho_power_w")?.unwrap().extract()?,
                ho_events: d.get_item("ho_events")?.unwrap().extract()?,
                min_rate: d.get_item("min_rate")?.unwrap().extract()?,
                solve_ms: d.get_item("solve_ms")?.unwrap().extract()?,
            })
        })
        .collect::<PyResult<_>>()?;
    Ok(harness::frames_csv(&parsed))
}

#[pymodule]
#[pyo3(name = "leocoop")]
fn leocoop_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(frames_csv, m)?)?;
    Ok(())
}
