//! Rise time, steady-state error and overshoot of a closed-loop run.

use crate::control::RunLog;
use crate::error::{Error, Result};

/// Length of the trailing window the steady-state statistics cover.
pub const STEADY_WINDOW_S: f64 = 20.0;

/// Shortest log the metrics are defined on.
pub const MIN_LOG_DURATION_S: f64 = 30.0;

/// Fraction of the desired angle whose first crossing defines rise time.
pub const RISE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// First time the measured angle reaches 90 % of the desired angle.
    pub rise_time_s: Option<f64>,
    /// Mean |e_α| over the steady window.
    pub steady_state_error_deg: f64,
    /// Max |e_α| over the steady window.
    pub error_band_deg: f64,
    pub overshoot_deg: f64,
    pub band_deg: f64,
    pub settled: bool,
}

pub fn compute_metrics(log: &RunLog, band_deg: f64) -> Result<Metrics> {
    compute_metrics_over(log, band_deg, STEADY_WINDOW_S)
}

pub fn compute_metrics_over(log: &RunLog, band_deg: f64, window_s: f64) -> Result<Metrics> {
    let (Some(first), Some(last)) = (log.samples.first(), log.samples.last()) else {
        return Err(Error::Domain("cannot compute metrics of an empty log".into()));
    };
    if log.duration_s() + 1e-9 < MIN_LOG_DURATION_S {
        return Err(Error::Domain(format!(
            "metrics need at least {MIN_LOG_DURATION_S} s of log, got {:.3} s",
            log.duration_s()
        )));
    }
    if !(band_deg >= 0.0) || !(window_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "band must be non-negative and window positive, got {band_deg} and {window_s}"
        )));
    }
    let desired = first.desired_deg;
    let rise_time_s = log
        .samples
        .iter()
        .find(|s| s.angle_meas_deg >= RISE_FRACTION * s.desired_deg)
        .map(|s| s.t_s - first.t_s);

    let window_start = last.t_s - window_s - 1e-9;
    let errors: Vec<f64> = log
        .samples
        .iter()
        .filter(|s| s.t_s >= window_start)
        .map(|s| s.e_alpha_deg.abs())
        .collect();
    let steady_state_error_deg = errors.iter().sum::<f64>() / errors.len() as f64;
    let error_band_deg = errors.iter().copied().fold(0.0, f64::max);
    let overshoot_deg = log
        .samples
        .iter()
        .map(|s| s.angle_meas_deg - desired)
        .fold(0.0, f64::max);

    Ok(Metrics {
        rise_time_s,
        steady_state_error_deg,
        error_band_deg,
        overshoot_deg,
        band_deg,
        settled: rise_time_s.is_some() && error_band_deg <= band_deg,
    })
}

/// Earliest sample time from which |e_α| stays within `tolerance_deg` until
/// the end of the log.
pub fn settling_time(log: &RunLog, tolerance_deg: f64) -> Option<f64> {
    let start = log.samples.first()?.t_s;
    let last_out = log.samples.iter().rposition(|s| s.e_alpha_deg.abs() > tolerance_deg);
    match last_out {
        None => Some(0.0),
        Some(i) => log.samples.get(i + 1).map(|s| s.t_s - start),
    }
}
