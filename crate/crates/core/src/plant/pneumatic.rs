//! Chamber pressure dynamics and the quasi-static pressure → angle map.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the dead time acts on the valve opening seen by the chamber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeadTimeModel {
    /// Every opening change reaches the chamber `dead_time_s` later.
    #[default]
    Transport,
    /// The supply line must charge once: no flow reaches the chamber until
    /// `dead_time_s` after the valve first opens, after which the chamber
    /// follows the valve directly.
    Startup,
}

impl DeadTimeModel {
    pub fn name(self) -> &'static str {
        match self {
            DeadTimeModel::Transport => "transport",
            DeadTimeModel::Startup => "startup",
        }
    }
}

impl fmt::Display for DeadTimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeadTimeModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transport" => Ok(DeadTimeModel::Transport),
            "startup" => Ok(DeadTimeModel::Startup),
            other => Err(Error::Parse(format!(
                "unknown dead-time model {other:?} (expected transport or startup)"
            ))),
        }
    }
}

/// Supply side of the pneumatic circuit and the calibrated forward map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PneumaticParams {
    pub supply_kpa: f64,
    /// Fill rate (1/s) at full valve opening.
    pub fill_rate_per_s: f64,
    pub leak_rate_per_s: f64,
    /// Delay between valve motion and chamber response.
    pub dead_time_s: f64,
    pub dead_time_model: DeadTimeModel,
    /// Inflation dead zone below which the module does not bend.
    pub threshold_kpa: f64,
    pub gain_deg_per_kpa: f64,
    /// Extra bend per unit of SMA recovery strain.
    pub sma_gain_deg_per_strain: f64,
    pub alpha_max_deg: f64,
}

impl Default for PneumaticParams {
    fn default() -> Self {
        Self {
            supply_kpa: 210.0,
            fill_rate_per_s: 0.25,
            leak_rate_per_s: 0.01,
            dead_time_s: 0.0,
            dead_time_model: DeadTimeModel::Transport,
            threshold_kpa: 30.0,
            gain_deg_per_kpa: 1.0,
            sma_gain_deg_per_strain: 750.0,
            alpha_max_deg: 180.0,
        }
    }
}

impl PneumaticParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("supply_kpa", self.supply_kpa),
            ("gain_deg_per_kpa", self.gain_deg_per_kpa),
            ("alpha_max_deg", self.alpha_max_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("plant.{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("fill_rate_per_s", self.fill_rate_per_s),
            ("leak_rate_per_s", self.leak_rate_per_s),
            ("dead_time_s", self.dead_time_s),
            ("sma_gain_deg_per_strain", self.sma_gain_deg_per_strain),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "plant.{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.threshold_kpa >= 0.0 && self.threshold_kpa < self.supply_kpa) {
            return Err(Error::InvalidParameter(format!(
                "plant.threshold_kpa must lie in [0, supply_kpa), got {}",
                self.threshold_kpa
            )));
        }
        if self.alpha_max_deg > 180.0 {
            return Err(Error::InvalidParameter(format!(
                "plant.alpha_max_deg cannot exceed 180, got {}",
                self.alpha_max_deg
            )));
        }
        Ok(())
    }
}

/// Advances `dP/dt = fill·u·(supply − P) − leak·P` by `dt` with the opening
/// held, using the exact exponential solution of the linear ODE, and clamps
/// to `[0, supply]`. `opening` is the (already delayed) valve opening.
///
/// Splitting a step into smaller ones gives the same pressure up to
/// rounding, so closed-loop runs do not depend on the integration step.
pub fn pressure_step(pressure_kpa: f64, opening: f64, params: &PneumaticParams, dt: f64) -> f64 {
    let u = opening.clamp(0.0, 1.0);
    let inflow = params.fill_rate_per_s * u;
    let decay = inflow + params.leak_rate_per_s;
    if decay <= 0.0 {
        return pressure_kpa.clamp(0.0, params.supply_kpa);
    }
    let target = inflow * params.supply_kpa / decay;
    let next = pressure_kpa + (target - pressure_kpa) * -(-decay * dt).exp_m1();
    next.clamp(0.0, params.supply_kpa)
}

/// Quasi-static bend angle: `K·max(0, P − P_th) + C_sma·strain`, saturated
/// to `[0, alpha_max]`.
pub fn forward_angle(pressure_kpa: f64, sma_strain: f64, params: &PneumaticParams) -> f64 {
    let pneumatic = params.gain_deg_per_kpa * (pressure_kpa - params.threshold_kpa).max(0.0);
    (pneumatic + params.sma_gain_deg_per_strain * sma_strain).clamp(0.0, params.alpha_max_deg)
}

/// Outcome of inverting the forward map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressurePrediction {
    pub pressure_kpa: f64,
    /// The requested angle is not attainable for any pressure in
    /// `[0, supply]`. The pressure is the closest end of that interval.
    pub unreachable: bool,
}

/// Agreement demanded between the forward map and the requested angle.
pub const PREDICTION_TOLERANCE_DEG: f64 = 0.01;

/// Smallest pressure in `[0, supply]` at which the forward map reaches
/// `alpha_des`, found by bisection.
pub fn predict_pressure(
    alpha_des: f64,
    sma_strain: f64,
    params: &PneumaticParams,
) -> Result<PressurePrediction> {
    if !(0.0..=params.alpha_max_deg).contains(&alpha_des) {
        return Err(Error::Domain(format!(
            "desired angle must lie in [0, {}], got {alpha_des}",
            params.alpha_max_deg
        )));
    }
    let f = |p: f64| forward_angle(p, sma_strain, params);
    let (mut lo, mut hi) = (0.0, params.supply_kpa);
    if f(lo) >= alpha_des {
        // Already at (or past) the target with no inflation at all.
        let unreachable = f(lo) - alpha_des > PREDICTION_TOLERANCE_DEG;
        return Ok(PressurePrediction { pressure_kpa: 0.0, unreachable });
    }
    if f(hi) < alpha_des - PREDICTION_TOLERANCE_DEG {
        return Ok(PressurePrediction { pressure_kpa: hi, unreachable: true });
    }
    // Invariant: f(lo) < alpha_des ≤ f(hi) (or within tolerance of it).
    for _ in 0..200 {
        if hi - lo <= 1e-12 * params.supply_kpa {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= alpha_des {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PressurePrediction { pressure_kpa: hi, unreachable: false })
}
