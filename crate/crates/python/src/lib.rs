//! Python bindings: configuration, closed-loop runs, metrics, the plant's
//! forward and inverse maps, and the vision pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use softbend_core::control::{Mode, RunSample};
use softbend_core::harness;
use softbend_core::kinematics::{self as kin, ModuleGeometry};
use softbend_core::plant::{self, PneumaticParams};
use softbend_core::vision::{self, CameraIntrinsics, DEFAULT_THRESHOLD};
use softbend_core::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Parse(_) | Error::InvalidParameter(_) | Error::Domain(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(to_py)
}

#[pyclass(name = "ExperimentConfig", module = "softbend", from_py_object)]
#[derive(Clone)]
struct PyExperimentConfig {
    inner: harness::ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    /// Defaults for `mode` ("pneumatic_only" or "hybrid") at `desired_angle_deg`.
    #[new]
    fn new(mode: &str, desired_angle_deg: f64) -> PyResult<Self> {
        let inner = harness::ExperimentConfig::new(parse_mode(mode)?, desired_angle_deg);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: harness::parse_config(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: harness::load_config(&path).map_err(to_py)? })
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.name()
    }

    #[getter]
    fn scenario(&self) -> String {
        self.inner.scenario.clone()
    }

    #[getter]
    fn desired_angle_deg(&self) -> f64 {
        self.inner.desired_angle_deg
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s
    }

    #[getter]
    fn dt_s(&self) -> f64 {
        self.inner.dt_s
    }

    #[getter]
    fn rng_seed(&self) -> u64 {
        self.inner.rng_seed
    }

    #[getter]
    fn band_deg(&self) -> f64 {
        self.inner.band_deg
    }

    fn with_mode(&self, mode: &str) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_mode(parse_mode(mode)?).map_err(to_py)? })
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self { inner: self.inner.with_seed(seed) }
    }

    fn with_desired_angle(&self, desired_angle_deg: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_desired_angle(desired_angle_deg).map_err(to_py)? })
    }

    fn with_duration(&self, duration_s: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_duration(duration_s).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(scenario={:?}, mode={:?}, desired_angle_deg={})",
            self.inner.scenario,
            self.inner.mode.name(),
            self.inner.desired_angle_deg
        )
    }
}

#[pyclass(name = "RunLog", module = "softbend", from_py_object)]
#[derive(Clone)]
struct PyRunLog {
    inner: softbend_core::control::RunLog,
}

#[pymethods]
impl PyRunLog {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self { inner: harness::parse_csv(text).map_err(to_py)? })
    }

    fn to_csv(&self) -> String {
        harness::to_csv(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[staticmethod]
    fn columns() -> Vec<&'static str> {
        harness::CSV_COLUMNS.to_vec()
    }

    /// Values of one CSV column, in time order.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let pick: fn(&RunSample) -> f64 = match name {
            "t_s" => |s| s.t_s,
            "desired_deg" => |s| s.desired_deg,
            "angle_true_deg" => |s| s.angle_true_deg,
            "angle_meas_deg" => |s| s.angle_meas_deg,
            "pressure_kpa" => |s| s.pressure_kpa,
            "pressure_meas_kpa" => |s| s.pressure_meas_kpa,
            "p_pred_kpa" => |s| s.p_pred_kpa,
            "e_p_kpa" => |s| s.e_p_kpa,
            "e_alpha_deg" => |s| s.e_alpha_deg,
            "valve_opening" => |s| s.valve_opening,
            "sma_power" => |s| if s.sma_power { 1.0 } else { 0.0 },
            "sma_temp_c" => |s| s.sma_temp_c,
            "sma_strain" => |s| s.sma_strain,
            other => return Err(PyValueError::new_err(format!("unknown column {other:?}"))),
        };
        Ok(self.inner.samples.iter().map(pick).collect())
    }

    fn svg(&self) -> PyResult<String> {
        harness::render_svg(&self.inner).map_err(to_py)
    }
}

#[pyclass(name = "Metrics", module = "softbend", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyMetrics {
    rise_time_s: Option<f64>,
    steady_state_error_deg: f64,
    error_band_deg: f64,
    overshoot_deg: f64,
    band_deg: f64,
    settled: bool,
}

impl From<harness::Metrics> for PyMetrics {
    fn from(m: harness::Metrics) -> Self {
        Self {
            rise_time_s: m.rise_time_s,
            steady_state_error_deg: m.steady_state_error_deg,
            error_band_deg: m.error_band_deg,
            overshoot_deg: m.overshoot_deg,
            band_deg: m.band_deg,
            settled: m.settled,
        }
    }
}

#[pymethods]
impl PyMetrics {
    fn __repr__(&self) -> String {
        format!(
            "Metrics(rise_time_s={}, steady_state_error_deg={:.3}, error_band_deg={:.3}, \
             overshoot_deg={:.3}, settled={})",
            self.rise_time_s.map_or_else(|| "None".to_string(), |v| format!("{v:.3}")),
            self.steady_state_error_deg, self.error_band_deg, self.overshoot_deg,
            if self.settled { "True" } else { "False" }
        )
    }
}

#[pyfunction]
fn run_experiment(py: Python<'_>, config: &PyExperimentConfig) -> PyResult<PyRunLog> {
    let cfg = config.inner.clone();
    let log = py.detach(move || harness::run_experiment(&cfg)).map_err(to_py)?;
    Ok(PyRunLog { inner: log })
}

#[pyfunction]
#[pyo3(signature = (log, band_deg = 5.0))]
fn compute_metrics(log: &PyRunLog, band_deg: f64) -> PyResult<PyMetrics> {
    Ok(harness::compute_metrics(&log.inner, band_deg).map_err(to_py)?.into())
}

/// Runs both modes of the scenario and returns the key = value report.
#[pyfunction]
fn compare(py: Python<'_>, config: &PyExperimentConfig) -> PyResult<String> {
    let cfg = config.inner.clone();
    let report = py.detach(move || harness::compare_scenario(&cfg)).map_err(to_py)?;
    Ok(report.to_key_value())
}

#[pyfunction]
fn law_of_cosines_angle(a: f64, b: f64, c: f64) -> PyResult<f64> {
    kin::law_of_cosines_angle(a, b, c).map_err(to_py)
}

/// Bend angle recovered from the ideal backbone of a module bent by `theta_deg`.
#[pyfunction]
fn kinematic_round_trip(theta_deg: f64) -> PyResult<f64> {
    let geom = ModuleGeometry::default();
    let pose = kin::backbone_from_angle(&geom, theta_deg, 200).map_err(to_py)?;
    let tri = kin::triangle_from_backbone(&pose, geom.width_mm).map_err(to_py)?;
    Ok(kin::bend_angle_from_triangle(&tri).degrees)
}

#[pyfunction]
#[pyo3(signature = (pressure_kpa, sma_strain = 0.0))]
fn forward_angle(pressure_kpa: f64, sma_strain: f64) -> f64 {
    plant::forward_angle(pressure_kpa, sma_strain, &PneumaticParams::default())
}

#[pyfunction]
#[pyo3(signature = (alpha_deg, sma_strain = 0.0))]
fn predict_pressure(alpha_deg: f64, sma_strain: f64) -> PyResult<f64> {
    let p = plant::predict_pressure(alpha_deg, sma_strain, &PneumaticParams::default()).map_err(to_py)?;
    Ok(p.pressure_kpa)
}

/// PGM (P5) bytes of the default camera's view of a module bent by `theta_deg`.
#[pyfunction]
fn render_pgm(theta_deg: f64) -> PyResult<Vec<u8>> {
    let geom = ModuleGeometry::default();
    let pose = kin::backbone_from_angle(&geom, theta_deg, 200).map_err(to_py)?;
    let frame = vision::render_frame(&pose, &geom, &CameraIntrinsics::default()).map_err(to_py)?;
    Ok(vision::encode_pgm(&frame))
}

/// Bend angle measured in PGM (P5) bytes from the default camera.
#[pyfunction]
#[pyo3(signature = (pgm, threshold = DEFAULT_THRESHOLD))]
fn estimate_angle(pgm: &[u8], threshold: u8) -> PyResult<f64> {
    let frame = vision::decode_pgm(pgm).map_err(to_py)?;
    let cam = CameraIntrinsics {
        width_px: frame.width(),
        height_px: frame.height(),
        ..CameraIntrinsics::default()
    };
    let m = vision::estimate_angle(&frame, &cam, threshold, cam.origin_px, 0.0).map_err(to_py)?;
    Ok(m.angle_deg)
}

#[pymodule]
fn softbend(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperimentConfig>()?;
    m.add_class::<PyRunLog>()?;
    m.add_class::<PyMetrics>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(law_of_cosines_angle, m)?)?;
    m.add_function(wrap_pyfunction!(kinematic_round_trip, m)?)?;
    m.add_function(wrap_pyfunction!(forward_angle, m)?)?;
    m.add_function(wrap_pyfunction!(predict_pressure, m)?)?;
    m.add_function(wrap_pyfunction!(render_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_angle, m)?)?;
    Ok(())
}
