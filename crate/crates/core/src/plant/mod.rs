//! Simulated testbed physics: chamber pressure, SMA wire, sensors and the
//! quasi-static pressure/strain → angle map.

mod pneumatic;
mod sensor;
mod sma;

use std::collections::VecDeque;

pub use pneumatic::{
    forward_angle, DeadTimeModel, predict_pressure, pressure_step, PneumaticParams, PressurePrediction,
    PREDICTION_TOLERANCE_DEG,
};
pub use sensor::{PressureSensor, SensorModel};
pub use sma::{sma_step, SmaState, SmaWireParams};

use crate::error::{Error, Result};

/// Largest integration step the plant accepts.
pub const MAX_DT_S: f64 = 0.1;

/// Everything the plant needs besides its state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub pneumatic: PneumaticParams,
    pub sma: SmaWireParams,
    pub ambient_c: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            pneumatic: PneumaticParams::default(),
            sma: SmaWireParams::default(),
            ambient_c: 25.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        self.pneumatic.validate()?;
        self.sma.validate()?;
        if !self.ambient_c.is_finite() {
            return Err(Error::InvalidParameter("plant.ambient_c must be finite".into()));
        }
        Ok(())
    }
}

/// Complete physical state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub t_s: f64,
    pub pressure_kpa: f64,
    pub angle_true_deg: f64,
    pub sma_temp_c: f64,
    pub martensite_fraction: f64,
    pub sma_strain: f64,
    pub valve_opening: f64,
}

impl PlantState {
    /// Deflated, straight module with a cold wire and a closed valve.
    pub fn at_rest(ambient_c: f64) -> Self {
        Self {
            t_s: 0.0,
            pressure_kpa: 0.0,
            angle_true_deg: 0.0,
            sma_temp_c: ambient_c,
            martensite_fraction: 1.0,
            sma_strain: 0.0,
            valve_opening: 0.0,
        }
    }

    pub fn sma(&self) -> SmaState {
        SmaState {
            temp_c: self.sma_temp_c,
            martensite_fraction: self.martensite_fraction,
            strain: self.sma_strain,
        }
    }
}

/// Actuator inputs applied over one plant step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInputs {
    pub valve_opening: f64,
    pub sma_power: bool,
}

/// Dead-time element between the commanded valve opening and the opening
/// the chamber responds to.
#[derive(Debug, Clone)]
struct DelayLine {
    dead_time_s: f64,
    model: DeadTimeModel,
    pending: VecDeque<(f64, f64)>,
    last_commanded: f64,
    delivered: f64,
    first_open_s: Option<f64>,
}

impl DelayLine {
    fn new(dead_time_s: f64, model: DeadTimeModel, initial: f64) -> Self {
        Self {
            dead_time_s,
            model,
            pending: VecDeque::new(),
            last_commanded: initial,
            delivered: initial,
            first_open_s: None,
        }
    }

    fn push(&mut self, t_s: f64, opening: f64) {
        if opening > 0.0 && self.first_open_s.is_none() {
            self.first_open_s = Some(t_s);
        }
        if opening != self.last_commanded {
            self.pending.push_back((t_s, opening));
            self.last_commanded = opening;
        }
    }

    /// Opening in effect at the chamber at time `t_s`.
    fn output(&mut self, t_s: f64) -> f64 {
        let horizon = t_s - self.dead_time_s + 1e-9;
        match self.model {
            DeadTimeModel::Transport => {
                while let Some(&(at, u)) = self.pending.front() {
                    if at > horizon {
                        break;
                    }
                    self.delivered = u;
                    self.pending.pop_front();
                }
                self.delivered
            }
            DeadTimeModel::Startup => match self.first_open_s {
                Some(t0) if t0 <= horizon => self.last_commanded,
                _ => 0.0,
            },
        }
    }
}

/// A single-owner plant instance advanced by one stepping loop.
#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    state: PlantState,
    delay: DelayLine,
    clock: Clock,
}

#[derive(Debug, Clone, Copy)]
struct Clock {
    origin_s: f64,
    dt_s: f64,
    steps: u64,
}

impl Plant {
    pub fn new(params: PlantParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::with_state(params, PlantState::at_rest(params.ambient_c)))
    }

    pub fn with_state(params: PlantParams, state: PlantState) -> Self {
        Self {
            params,
            state,
            delay: DelayLine::new(
                params.pneumatic.dead_time_s,
                params.pneumatic.dead_time_model,
                state.valve_opening,
            ),
            clock: Clock { origin_s: state.t_s, dt_s: f64::NAN, steps: 0 },
        }
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    /// Advances the plant by `dt`: valve → pressure → SMA → angle.
    pub fn step(&mut self, inputs: PlantInputs, dt: f64) -> Result<&PlantState> {
        if !(dt > 0.0 && dt <= MAX_DT_S) {
            return Err(Error::Domain(format!("plant step must lie in (0, {MAX_DT_S}] s, got {dt}")));
        }
        let start = self.state;
        let opening = inputs.valve_opening.clamp(0.0, 1.0);
        self.delay.push(start.t_s, opening);
        let delivered = self.delay.output(start.t_s);

        let p = &self.params;
        let pressure_kpa = pressure_step(start.pressure_kpa, delivered, &p.pneumatic, dt);
        let sma = sma_step(&start.sma(), &p.sma, inputs.sma_power, p.ambient_c, dt);
        let angle_true_deg = forward_angle(pressure_kpa, sma.strain, &p.pneumatic);

        // Time is an exact multiple of dt since the last dt change, so long
        // runs do not accumulate rounding drift.
        if self.clock.dt_s != dt {
            self.clock = Clock { origin_s: start.t_s, dt_s: dt, steps: 0 };
        }
        self.clock.steps += 1;
        let t_s = self.clock.origin_s + self.clock.steps as f64 * dt;
        self.state = PlantState {
            t_s,
            pressure_kpa,
            angle_true_deg,
            sma_temp_c: sma.temp_c,
            martensite_fraction: sma.martensite_fraction,
            sma_strain: sma.strain,
            valve_opening: opening,
        };
        Ok(&self.state)
    }
}

/// Pure single-step form of [`Plant::step`] for a plant with no dead time.
pub fn plant_step(
    state: &PlantState,
    inputs: PlantInputs,
    params: &PlantParams,
    dt: f64,
) -> Result<PlantState> {
    let mut plant = Plant::with_state(
        PlantParams {
            pneumatic: PneumaticParams { dead_time_s: 0.0, ..params.pneumatic },
            ..*params
        },
        *state,
    );
    plant.step(inputs, dt)?;
    let mut next = *plant.state();
    next.t_s = state.t_s + dt;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rest_is_a_fixed_point() {
        let params = PlantParams::default();
        let mut plant = Plant::new(params).unwrap();
        for _ in 0..1000 {
            plant.step(PlantInputs::default(), 0.01).unwrap();
        }
        let s = plant.state();
        assert_eq!(s.pressure_kpa, 0.0);
        assert_eq!(s.angle_true_deg, 0.0);
        assert_eq!(s.sma_temp_c, 25.0);
        assert_eq!(s.martensite_fraction, 1.0);
        assert_abs_diff_eq!(s.t_s, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn open_valve_reaches_pressure_steady_state() {
        let params = PlantParams::default();
        let mut plant = Plant::new(params).unwrap();
        let open = PlantInputs { valve_opening: 1.0, sma_power: false };
        for _ in 0..6000 {
            plant.step(open, 0.01).unwrap();
        }
        let pn = params.pneumatic;
        let p_ss = pn.supply_kpa * pn.fill_rate_per_s / (pn.fill_rate_per_s + pn.leak_rate_per_s);
        assert_abs_diff_eq!(p_ss, 201.923, epsilon = 1e-3);
        let expected = forward_angle(p_ss, 0.0, &pn);
        assert!((plant.state().angle_true_deg - expected).abs() < 0.5);
    }

    #[test]
    fn dead_time_delays_the_chamber() {
        let params = PlantParams {
            pneumatic: PneumaticParams { dead_time_s: 2.0, ..Default::default() },
            ..Default::default()
        };
        let mut plant = Plant::new(params).unwrap();
        let open = PlantInputs { valve_opening: 1.0, sma_power: false };
        for _ in 0..200 {
            plant.step(open, 0.01).unwrap();
        }
        assert_eq!(plant.state().pressure_kpa, 0.0);
        plant.step(open, 0.01).unwrap();
        assert!(plant.state().pressure_kpa > 0.0);
    }

    #[test]
    fn startup_dead_time_only_delays_first_opening() {
        let params = PlantParams {
            pneumatic: PneumaticParams {
                dead_time_s: 2.0,
                dead_time_model: DeadTimeModel::Startup,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut plant = Plant::new(params).unwrap();
        let closed = PlantInputs::default();
        let open = PlantInputs { valve_opening: 1.0, sma_power: false };
        for _ in 0..100 {
            plant.step(closed, 0.01).unwrap();
        }
        for _ in 0..200 {
            plant.step(open, 0.01).unwrap();
        }
        assert_eq!(plant.state().pressure_kpa, 0.0);
        for _ in 0..100 {
            plant.step(open, 0.01).unwrap();
        }
        let p = plant.state().pressure_kpa;
        assert!(p > 0.0);
        plant.step(closed, 0.01).unwrap();
        assert!(plant.state().pressure_kpa < p);
    }

    #[test]
    fn dt_refinement_open_loop() {
        let params = PlantParams::default();
        let schedule = |t: f64| PlantInputs {
            valve_opening: if (t % 20.0) < 10.0 { 0.6 } else { 0.1 },
            sma_power: (t % 7.0) < 1.0,
        };
        let run = |dt: f64| {
            let mut plant = Plant::new(params).unwrap();
            let per_sample = (0.1 / dt).round() as usize;
            let mut out = Vec::new();
            for k in 0..600 {
                let t = k as f64 * 0.1;
                for _ in 0..per_sample {
                    plant.step(schedule(t), dt).unwrap();
                }
                out.push(plant.state().angle_true_deg);
            }
            out
        };
        let (coarse, fine) = (run(0.01), run(0.001));
        let worst = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 0.5, "worst dt-refinement gap {worst}°");
    }

    #[test]
    fn rejects_bad_dt() {
        let mut plant = Plant::new(PlantParams::default()).unwrap();
        assert!(plant.step(PlantInputs::default(), 0.0).is_err());
        assert!(plant.step(PlantInputs::default(), 0.2).is_err());
    }

    #[test]
    fn pure_step_matches_plant() {
        let params = PlantParams::default();
        let s0 = PlantState::at_rest(25.0);
        let inputs = PlantInputs { valve_opening: 0.5, sma_power: true };
        let s1 = plant_step(&s0, inputs, &params, 0.01).unwrap();
        let mut plant = Plant::new(params).unwrap();
        plant.step(inputs, 0.01).unwrap();
        assert_eq!(&s1, plant.state());
    }
}
