//! Closed-loop bending-angle controller: pressure and angle errors, the
//! bang-bang decision with deadbands, the stepper-driven valve and the loop
//! that ties the plant, the camera and the controller together.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::kinematics::{backbone_from_angle, ModuleGeometry};
use crate::plant::{predict_pressure, Plant, PlantInputs, PressureSensor};
use crate::vision::{add_gaussian_noise, estimate_angle, render_frame, CameraIntrinsics, GrayImage};

/// Range of desired angles the controller accepts (degrees).
pub const DESIRED_ANGLE_RANGE: (f64, f64) = (10.0, 75.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    PneumaticOnly,
    Hybrid,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::PneumaticOnly => "pneumatic_only",
            Mode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pneumatic_only" => Ok(Mode::PneumaticOnly),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(Error::Parse(format!(
                "unknown mode {other:?} (expected pneumatic_only or hybrid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub mode: Mode,
    pub desired_angle_deg: f64,
    pub angle_deadband_deg: f64,
    pub pressure_deadband_kpa: f64,
    pub control_period_s: f64,
    pub stepper_rate_steps_per_s: f64,
    pub steps_full_travel: u32,
}

impl ControllerConfig {
    pub fn new(mode: Mode, desired_angle_deg: f64) -> Self {
        Self {
            mode,
            desired_angle_deg,
            angle_deadband_deg: 0.5,
            pressure_deadband_kpa: 1.0,
            control_period_s: 0.1,
            stepper_rate_steps_per_s: 200.0,
            steps_full_travel: 400,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = DESIRED_ANGLE_RANGE;
        if !(lo..=hi).contains(&self.desired_angle_deg) {
            return Err(Error::InvalidParameter(format!(
                "desired_angle_deg must lie in [{lo}, {hi}], got {}",
                self.desired_angle_deg
            )));
        }
        if !(self.angle_deadband_deg >= 0.0) || !(self.pressure_deadband_kpa >= 0.0) {
            return Err(Error::InvalidParameter(
                "controller.angle_deadband_deg and controller.pressure_deadband_kpa must be non-negative"
                    .into(),
            ));
        }
        if !(self.control_period_s > 0.0 && self.control_period_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "controller.control_period_s must be positive, got {}",
                self.control_period_s
            )));
        }
        if !(self.stepper_rate_steps_per_s >= 0.0 && self.stepper_rate_steps_per_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "controller.stepper_rate_steps_per_s must be non-negative, got {}",
                self.stepper_rate_steps_per_s
            )));
        }
        if self.steps_full_travel == 0 {
            return Err(Error::InvalidParameter("controller.steps_full_travel must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValveDirection {
    Open,
    Close,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlCommand {
    pub valve_direction: ValveDirection,
    pub sma_power: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSignals {
    pub e_p: f64,
    pub e_alpha: f64,
}

/// Stepper-driven flow valve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValveState {
    pub step_position: u32,
    pub steps_full_travel: u32,
}

impl ValveState {
    pub fn closed(steps_full_travel: u32) -> Self {
        Self { step_position: 0, steps_full_travel }
    }

    pub fn opening(&self) -> f64 {
        self.step_position as f64 / self.steps_full_travel as f64
    }
}

pub fn pressure_error(p_pred: f64, p_det: f64) -> f64 {
    p_pred - p_det
}

pub fn angle_error(alpha_des: f64, alpha_det: f64) -> f64 {
    alpha_des - alpha_det
}

/// Bang-bang decision. Positive angle error beyond the deadband opens the
/// valve (and powers the wire in hybrid mode); negative error beyond it
/// closes the valve with the wire off; inside the deadband everything
/// holds. The valve never opens while the measured pressure already exceeds
/// the model prediction by the pressure deadband.
pub fn control_step(cfg: &ControllerConfig, errs: &ErrorSignals) -> ControlCommand {
    if errs.e_alpha > cfg.angle_deadband_deg {
        let interlocked = errs.e_p <= -cfg.pressure_deadband_kpa;
        ControlCommand {
            valve_direction: if interlocked { ValveDirection::Hold } else { ValveDirection::Open },
            sma_power: cfg.mode == Mode::Hybrid,
        }
    } else if errs.e_alpha < -cfg.angle_deadband_deg {
        ControlCommand { valve_direction: ValveDirection::Close, sma_power: false }
    } else {
        ControlCommand { valve_direction: ValveDirection::Hold, sma_power: false }
    }
}

/// Moves the stepper `round(rate·dt)` steps in the commanded direction.
pub fn valve_step(
    valve: &ValveState,
    cmd: &ControlCommand,
    dt: f64,
    cfg: &ControllerConfig,
) -> ValveState {
    let travel = cfg.steps_full_travel;
    let delta = (cfg.stepper_rate_steps_per_s * dt).round().max(0.0) as u64;
    let pos = valve.step_position.min(travel) as u64;
    let step_position = match cmd.valve_direction {
        ValveDirection::Open => (pos + delta).min(travel as u64),
        ValveDirection::Close => pos.saturating_sub(delta),
        ValveDirection::Hold => pos,
    } as u32;
    ValveState { step_position, steps_full_travel: travel }
}

/// Synthetic camera watching the module.
#[derive(Debug, Clone)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub geometry: ModuleGeometry,
    pub threshold: u8,
    pub pixel_noise_sigma: f64,
    rng: ChaCha8Rng,
}

impl Camera {
    pub fn new(
        intrinsics: CameraIntrinsics,
        geometry: ModuleGeometry,
        threshold: u8,
        pixel_noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        intrinsics.validate()?;
        geometry.validate()?;
        if !(pixel_noise_sigma >= 0.0 && pixel_noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "camera.pixel_noise_sigma must be non-negative, got {pixel_noise_sigma}"
            )));
        }
        Ok(Self {
            intrinsics,
            geometry,
            threshold,
            pixel_noise_sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Renders the frame the camera sees for a module bent by `angle_deg`.
    pub fn capture(&mut self, angle_deg: f64) -> Result<GrayImage> {
        let pose = backbone_from_angle(&self.geometry, angle_deg.clamp(0.0, 180.0), 200)?;
        let mut frame = render_frame(&pose, &self.geometry, &self.intrinsics)?;
        add_gaussian_noise(&mut frame, self.pixel_noise_sigma, &mut self.rng);
        Ok(frame)
    }

    pub fn base_hint(&self) -> Vec2 {
        self.intrinsics.origin_px
    }
}

/// One control-period record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSample {
    pub t_s: f64,
    pub desired_deg: f64,
    pub angle_true_deg: f64,
    pub angle_meas_deg: f64,
    pub pressure_kpa: f64,
    pub pressure_meas_kpa: f64,
    pub p_pred_kpa: f64,
    pub e_p_kpa: f64,
    pub e_alpha_deg: f64,
    pub valve_opening: f64,
    pub sma_power: bool,
    pub sma_temp_c: f64,
    pub sma_strain: f64,
}

/// Time series of a closed-loop run, one sample per control period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub samples: Vec<RunSample>,
}

impl RunLog {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t_s - a.t_s,
            _ => 0.0,
        }
    }
}

/// Result of [`run_controller`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControllerRun {
    pub log: RunLog,
    /// Frames on which rendering or the vision pipeline failed and the
    /// previous measurement was held.
    pub dropouts: usize,
}

/// Runs the loop for `duration_s` with the plant integrated at `dt_s`.
///
/// Each control period: read the pressure sensor, take the latest camera
/// measurement, predict the pressure for the desired angle, form both
/// errors, decide, move the valve, then integrate the plant across the
/// period. Vision failures are logged as dropouts and the last valid angle
/// is held.
pub fn run_controller(
    cfg: &ControllerConfig,
    plant: &mut Plant,
    sensor: &mut PressureSensor,
    camera: &mut Camera,
    duration_s: f64,
    dt_s: f64,
) -> Result<ControllerRun> {
    cfg.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Domain(format!("duration must be positive, got {duration_s}")));
    }
    let period = cfg.control_period_s;
    let substeps = (period / dt_s).round();
    if !(dt_s > 0.0) || substeps < 1.0 || (substeps * dt_s - period).abs() > 1e-9 * period {
        return Err(Error::Domain(format!(
            "control period {period} s must be a whole multiple of dt {dt_s} s"
        )));
    }
    let substeps = substeps as usize;
    let periods = (duration_s / period).round() as usize;
    let frame_interval = 1.0 / camera.intrinsics.frame_rate_hz;

    let mut valve = ValveState::closed(cfg.steps_full_travel);
    let mut log = RunLog { samples: Vec::with_capacity(periods + 1) };
    let mut dropouts = 0;
    let mut angle_meas = 0.0;
    let mut next_frame_s = 0.0;

    for k in 0..=periods {
        let t_s = k as f64 * period;
        let state = *plant.state();
        let pressure_meas = sensor.read_pressure(state.pressure_kpa);

        if t_s + 1e-9 >= next_frame_s {
            let measured = camera.capture(state.angle_true_deg).and_then(|frame| {
                estimate_angle(&frame, &camera.intrinsics, camera.threshold, camera.base_hint(), t_s)
            });
            match measured {
                Ok(m) => angle_meas = m.angle_deg,
                Err(_) => dropouts += 1,
            }
            while next_frame_s <= t_s + 1e-9 {
                next_frame_s += frame_interval;
            }
        }

        let p_pred = predict_pressure(cfg.desired_angle_deg, state.sma_strain, &plant.params().pneumatic)?
            .pressure_kpa;
        let errs = ErrorSignals {
            e_p: pressure_error(p_pred, pressure_meas),
            e_alpha: angle_error(cfg.desired_angle_deg, angle_meas),
        };
        let cmd = control_step(cfg, &errs);
        if k < periods {
            valve = valve_step(&valve, &cmd, period, cfg);
        }

        log.samples.push(RunSample {
            t_s,
            desired_deg: cfg.desired_angle_deg,
            angle_true_deg: state.angle_true_deg,
            angle_meas_deg: angle_meas,
            pressure_kpa: state.pressure_kpa,
            pressure_meas_kpa: pressure_meas,
            p_pred_kpa: p_pred,
            e_p_kpa: errs.e_p,
            e_alpha_deg: errs.e_alpha,
            valve_opening: valve.opening(),
            sma_power: cmd.sma_power,
            sma_temp_c: state.sma_temp_c,
            sma_strain: state.sma_strain,
        });

        if k == periods {
            break;
        }
        let inputs = PlantInputs { valve_opening: valve.opening(), sma_power: cmd.sma_power };
        for _ in 0..substeps {
            plant.step(inputs, dt_s)?;
        }
    }
    Ok(ControllerRun { log, dropouts })
}
