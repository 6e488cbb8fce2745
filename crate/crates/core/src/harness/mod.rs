//! Experiment execution, metrics and persistence.

mod config;
mod metrics;
mod plot;
mod runlog;

use std::fmt;
use std::path::Path;

pub use config::{parse_config, CameraConfig, ExperimentConfig};
pub use metrics::{
    compute_metrics, compute_metrics_over, settling_time, Metrics, MIN_LOG_DURATION_S,
    RISE_FRACTION, STEADY_WINDOW_S,
};
pub use plot::{emit_plot, render_svg};
pub use runlog::{
    parse_csv, quantize, quantize_log, read_csv, to_csv, write_csv, CSV_COLUMNS, CSV_VERSION_LINE,
};

use crate::control::{run_controller, Camera, ControllerRun, Mode, RunLog};
use crate::error::{Error, Result};
use crate::plant::{Plant, PressureSensor};

/// File name of the run log inside an experiment's output directory.
pub const RUN_LOG_FILE: &str = "run.csv";

/// Offset between the sensor and camera noise streams of one run.
const CAMERA_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Runs one closed-loop experiment and returns its log snapped onto the CSV
/// grid. Writes `run.csv` into the output directory when one is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunLog> {
    Ok(simulate(cfg)?.log)
}

/// Like [`run_experiment`], also reporting vision dropouts.
pub fn simulate(cfg: &ExperimentConfig) -> Result<ControllerRun> {
    cfg.validate()?;
    let mut plant = Plant::new(cfg.plant)?;
    let mut sensor = PressureSensor::new(cfg.sensor)?;
    let mut camera = Camera::new(
        cfg.camera.intrinsics,
        cfg.geometry,
        cfg.camera.threshold,
        cfg.camera.pixel_noise_sigma,
        cfg.rng_seed.wrapping_add(CAMERA_SEED_OFFSET),
    )?;
    let run = run_controller(&cfg.controller, &mut plant, &mut sensor, &mut camera, cfg.duration_s, cfg.dt_s)?;
    let log = quantize_log(&run.log);
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        write_csv(&log, &dir.join(RUN_LOG_FILE))?;
    }
    Ok(ControllerRun { log, dropouts: run.dropouts })
}

/// Metrics of both modes on the same scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub scenario: String,
    pub desired_angle_deg: f64,
    pub pneumatic_only: Metrics,
    pub hybrid: Metrics,
    /// Pneumatic-only rise time over hybrid rise time.
    pub rise_time_ratio: Option<f64>,
    /// Pneumatic-only error band over hybrid error band.
    pub error_band_ratio: Option<f64>,
}

impl ComparisonReport {
    pub fn settled(&self) -> bool {
        self.pneumatic_only.settled && self.hybrid.settled
    }

    /// Hybrid strictly better on both rise time and error band.
    pub fn ordering_holds(&self) -> bool {
        let rise = match (self.hybrid.rise_time_s, self.pneumatic_only.rise_time_s) {
            (Some(h), Some(p)) => h < p,
            (Some(_), None) => true,
            _ => false,
        };
        rise && self.hybrid.error_band_deg < self.pneumatic_only.error_band_deg
    }

    /// Machine-readable `key = value` form.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| format!("{v:.6}"));
        let mut out = String::new();
        out.push_str(&format!("scenario = {}\n", self.scenario));
        out.push_str(&format!("desired_angle_deg = {:.6}\n", self.desired_angle_deg));
        for (name, m) in [("pneumatic_only", &self.pneumatic_only), ("hybrid", &self.hybrid)] {
            out.push_str(&format!("{name}.rise_time_s = {}\n", opt(m.rise_time_s)));
            out.push_str(&format!("{name}.steady_state_error_deg = {:.6}\n", m.steady_state_error_deg));
            out.push_str(&format!("{name}.error_band_deg = {:.6}\n", m.error_band_deg));
            out.push_str(&format!("{name}.overshoot_deg = {:.6}\n", m.overshoot_deg));
            out.push_str(&format!("{name}.band_deg = {:.6}\n", m.band_deg));
            out.push_str(&format!("{name}.settled = {}\n", m.settled));
        }
        out.push_str(&format!("settled = {}\n", self.settled()));
        out.push_str(&format!("rise_time_ratio = {}\n", opt(self.rise_time_ratio)));
        out.push_str(&format!("error_band_ratio = {}\n", opt(self.error_band_ratio)));
        out.push_str(&format!("ordering_holds = {}\n", self.ordering_holds()));
        out
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rise = |v: Option<f64>| v.map_or_else(|| "never".to_string(), |v| format!("{v:.1} s"));
        writeln!(f, "scenario {} at {:.1} deg", self.scenario, self.desired_angle_deg)?;
        writeln!(f, "{:<16}{:>12}{:>14}{:>14}{:>12}{:>9}", "mode", "rise", "mean |e|", "band", "overshoot", "settled")?;
        for (name, m) in [("pneumatic_only", &self.pneumatic_only), ("hybrid", &self.hybrid)] {
            writeln!(
                f,
                "{:<16}{:>12}{:>10.2} deg{:>10.2} deg{:>8.2} deg{:>9}",
                name,
                rise(m.rise_time_s),
                m.steady_state_error_deg,
                m.error_band_deg,
                m.overshoot_deg,
                if m.settled { "yes" } else { "no" }
            )?;
        }
        match (self.rise_time_ratio, self.error_band_ratio) {
            (Some(r), Some(b)) => writeln!(f, "rise-time ratio {r:.2}, error-band ratio {b:.2}")?,
            (Some(r), None) => writeln!(f, "rise-time ratio {r:.2}, error-band ratio undefined")?,
            _ => writeln!(f, "ratios not reported: a run did not settle")?,
        }
        write!(f, "hybrid better on both: {}", if self.ordering_holds() { "yes" } else { "no" })
    }
}

/// Runs both configurations and compares them. The two must differ in mode
/// and share the desired angle.
pub fn compare_modes(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<ComparisonReport> {
    if a.mode == b.mode {
        return Err(Error::InvalidParameter(format!(
            "compared runs must use different modes, both are {}",
            a.mode
        )));
    }
    if a.desired_angle_deg != b.desired_angle_deg {
        return Err(Error::InvalidParameter(format!(
            "compared runs must share desired_angle_deg, got {} and {}",
            a.desired_angle_deg, b.desired_angle_deg
        )));
    }
    let (pn_cfg, hy_cfg) = if a.mode == Mode::PneumaticOnly { (a, b) } else { (b, a) };
    let pn = compute_metrics_over(&run_experiment(pn_cfg)?, pn_cfg.band_deg, pn_cfg.metrics_window_s)?;
    let hy = compute_metrics_over(&run_experiment(hy_cfg)?, hy_cfg.band_deg, hy_cfg.metrics_window_s)?;
    Ok(make_report(pn_cfg.scenario.clone(), pn_cfg.desired_angle_deg, pn, hy))
}

/// Compares the two modes of one scenario, each with its own overrides.
pub fn compare_scenario(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    compare_modes(&cfg.with_mode(Mode::PneumaticOnly)?, &cfg.with_mode(Mode::Hybrid)?)
}

fn make_report(scenario: String, desired: f64, pn: Metrics, hy: Metrics) -> ComparisonReport {
    let both = pn.settled && hy.settled;
    let ratio = |num: Option<f64>, den: Option<f64>| match (num, den) {
        (Some(n), Some(d)) if both && d > 0.0 => Some(n / d),
        _ => None,
    };
    ComparisonReport {
        scenario,
        desired_angle_deg: desired,
        pneumatic_only: pn,
        hybrid: hy,
        rise_time_ratio: ratio(pn.rise_time_s, hy.rise_time_s),
        error_band_ratio: ratio(Some(pn.error_band_deg), Some(hy.error_band_deg)),
    }
}
