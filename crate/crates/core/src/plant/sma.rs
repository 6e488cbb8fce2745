//! Thermo-mechanical model of the embedded SMA wire: lumped Joule heating
//! with convective cooling, and cosine-law phase transformation kinetics
//! with separate heating and cooling branches.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmaWireParams {
    pub diameter_mm: f64,
    pub length_mm: f64,
    pub poisson_ratio: f64,
    pub max_recovery_strain: f64,
    pub austenite_start_c: f64,
    pub austenite_finish_c: f64,
    pub martensite_start_c: f64,
    pub martensite_finish_c: f64,
    pub resistance_ohm_per_m: f64,
    pub heat_capacity_j_per_kg_k: f64,
    pub density_kg_m3: f64,
    pub convection_w_per_m2_k: f64,
    pub drive_current_a: f64,
}

impl Default for SmaWireParams {
    fn default() -> Self {
        Self {
            diameter_mm: 0.25,
            length_mm: 1000.0,
            poisson_ratio: 0.33,
            max_recovery_strain: 0.04,
            austenite_start_c: 45.0,
            austenite_finish_c: 70.0,
            martensite_start_c: 55.0,
            martensite_finish_c: 30.0,
            resistance_ohm_per_m: 55.0,
            heat_capacity_j_per_kg_k: 460.0,
            density_kg_m3: 6450.0,
            convection_w_per_m2_k: 65.0,
            drive_current_a: 1.2,
        }
    }
}

impl SmaWireParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("diameter_mm", self.diameter_mm),
            ("length_mm", self.length_mm),
            ("resistance_ohm_per_m", self.resistance_ohm_per_m),
            ("heat_capacity_j_per_kg_k", self.heat_capacity_j_per_kg_k),
            ("density_kg_m3", self.density_kg_m3),
            ("convection_w_per_m2_k", self.convection_w_per_m2_k),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("sma.{name} must be positive, got {v}")));
            }
        }
        if !(self.drive_current_a >= 0.0 && self.drive_current_a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sma.drive_current_a must be non-negative, got {}",
                self.drive_current_a
            )));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "sma.poisson_ratio must lie in (-1, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        if !(self.max_recovery_strain > 0.0 && self.max_recovery_strain <= 0.08) {
            return Err(Error::InvalidParameter(format!(
                "sma.max_recovery_strain must lie in (0, 0.08], got {}",
                self.max_recovery_strain
            )));
        }
        if !(self.austenite_finish_c > self.austenite_start_c) {
            return Err(Error::InvalidParameter(
                "sma.austenite_finish_c must exceed sma.austenite_start_c".into(),
            ));
        }
        if !(self.martensite_start_c > self.martensite_finish_c) {
            return Err(Error::InvalidParameter(
                "sma.martensite_start_c must exceed sma.martensite_finish_c".into(),
            ));
        }
        Ok(())
    }

    /// Wire mass times specific heat (J/K).
    pub fn thermal_mass(&self) -> f64 {
        let radius_m = self.diameter_mm * 5e-4;
        let length_m = self.length_mm * 1e-3;
        self.density_kg_m3 * PI * radius_m * radius_m * length_m * self.heat_capacity_j_per_kg_k
    }

    /// Convective conductance `h·A` of the wire surface (W/K).
    pub fn surface_conductance(&self) -> f64 {
        let area = PI * self.diameter_mm * 1e-3 * self.length_mm * 1e-3;
        self.convection_w_per_m2_k * area
    }

    /// Joule heating `i²·R` at the drive current (W).
    pub fn joule_power(&self) -> f64 {
        self.drive_current_a.powi(2) * self.resistance_ohm_per_m * self.length_mm * 1e-3
    }

    /// Martensite fraction reached by heating to `temp_c` from fully martensite.
    pub fn heating_fraction(&self, temp_c: f64) -> f64 {
        let (start, finish) = (self.austenite_start_c, self.austenite_finish_c);
        if temp_c <= start {
            1.0
        } else if temp_c >= finish {
            0.0
        } else {
            0.5 * ((PI * (temp_c - start) / (finish - start)).cos() + 1.0)
        }
    }

    /// Martensite fraction reached by cooling to `temp_c` from fully austenite.
    pub fn cooling_fraction(&self, temp_c: f64) -> f64 {
        let (start, finish) = (self.martensite_start_c, self.martensite_finish_c);
        if temp_c >= start {
            0.0
        } else if temp_c <= finish {
            1.0
        } else {
            0.5 * ((PI * (temp_c - finish) / (start - finish)).cos() + 1.0)
        }
    }

    pub fn strain(&self, martensite_fraction: f64) -> f64 {
        self.max_recovery_strain * (1.0 - martensite_fraction)
    }
}

/// Thermal and phase state of the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmaState {
    pub temp_c: f64,
    pub martensite_fraction: f64,
    pub strain: f64,
}

impl SmaState {
    /// Cold, fully martensitic wire at `ambient_c`.
    pub fn at_rest(ambient_c: f64) -> Self {
        Self { temp_c: ambient_c, martensite_fraction: 1.0, strain: 0.0 }
    }
}

/// Advances the wire by `dt` with the drive held. The thermal ODE is linear,
/// so the temperature uses its exact exponential solution.
///
/// The phase fraction only moves along the branch matching the direction of
/// the temperature change (heating lowers it, cooling raises it), so it is
/// monotone along each branch and stays put inside the hysteresis loop.
pub fn sma_step(
    state: &SmaState,
    params: &SmaWireParams,
    powered: bool,
    ambient_c: f64,
    dt: f64,
) -> SmaState {
    let heating = if powered { params.joule_power() } else { 0.0 };
    let conductance = params.surface_conductance();
    let temp_c = if conductance > 0.0 {
        let target = ambient_c + heating / conductance;
        let rate = conductance / params.thermal_mass();
        state.temp_c + (target - state.temp_c) * -(-rate * dt).exp_m1()
    } else {
        state.temp_c + dt * heating / params.thermal_mass()
    };

    let xi = if temp_c > state.temp_c {
        state.martensite_fraction.min(params.heating_fraction(temp_c))
    } else if temp_c < state.temp_c {
        state.martensite_fraction.max(params.cooling_fraction(temp_c))
    } else {
        state.martensite_fraction
    }
    .clamp(0.0, 1.0);

    SmaState { temp_c, martensite_fraction: xi, strain: params.strain(xi) }
}
