//! Pressure transducer model: additive Gaussian noise, range clamp and ADC
//! quantisation, driven by a seeded stream so readings are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub range_min_kpa: f64,
    pub range_max_kpa: f64,
    pub noise_sigma_kpa: f64,
    pub quantization_bits: u32,
    pub rng_seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            range_min_kpa: 0.0,
            range_max_kpa: 200.0,
            noise_sigma_kpa: 0.5,
            quantization_bits: 10,
            rng_seed: 0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_max_kpa > self.range_min_kpa) {
            return Err(Error::InvalidParameter(format!(
                "sensor.pressure_range_max_kpa must exceed sensor.pressure_range_min_kpa, got [{}, {}]",
                self.range_min_kpa, self.range_max_kpa
            )));
        }
        if !(self.noise_sigma_kpa >= 0.0 && self.noise_sigma_kpa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sensor.pressure_noise_sigma_kpa must be non-negative, got {}",
                self.noise_sigma_kpa
            )));
        }
        if !(1..=24).contains(&self.quantization_bits) {
            return Err(Error::InvalidParameter(format!(
                "sensor.pressure_quantization_bits must lie in [1, 24], got {}",
                self.quantization_bits
            )));
        }
        Ok(())
    }

    /// Pressure represented by one ADC count.
    pub fn quantum_kpa(&self) -> f64 {
        (self.range_max_kpa - self.range_min_kpa) / ((1u64 << self.quantization_bits) - 1) as f64
    }

    /// Noise-free transfer function: clamp then quantise.
    pub fn digitize(&self, pressure_kpa: f64) -> f64 {
        let clamped = pressure_kpa.clamp(self.range_min_kpa, self.range_max_kpa);
        let q = self.quantum_kpa();
        let counts = ((clamped - self.range_min_kpa) / q).round();
        (self.range_min_kpa + counts * q).min(self.range_max_kpa)
    }
}

/// A sensor instance with its own noise stream.
#[derive(Debug, Clone)]
pub struct PressureSensor {
    model: SensorModel,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl PressureSensor {
    pub fn new(model: SensorModel) -> Result<Self> {
        model.validate()?;
        let noise = (model.noise_sigma_kpa > 0.0)
            .then(|| Normal::new(0.0, model.noise_sigma_kpa).expect("sigma validated"));
        Ok(Self { model, noise, rng: ChaCha8Rng::seed_from_u64(model.rng_seed) })
    }

    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    /// Reads the true chamber pressure, consuming one noise sample.
    pub fn read_pressure(&mut self, true_kpa: f64) -> f64 {
        let noisy = match &self.noise {
            Some(n) => true_kpa + n.sample(&mut self.rng),
            None => true_kpa,
        };
        self.model.digitize(noisy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantisation_only() {
        let model = SensorModel { noise_sigma_kpa: 0.0, ..Default::default() };
        let mut s = PressureSensor::new(model).unwrap();
        let r = s.read_pressure(100.0);
        assert!((r - 100.0).abs() <= 0.1, "reading {r}");
        assert!((model.quantum_kpa() - 200.0 / 1023.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_at_range_top() {
        let mut s = PressureSensor::new(SensorModel { noise_sigma_kpa: 5.0, ..Default::default() })
            .unwrap();
        for _ in 0..1000 {
            assert!(s.read_pressure(205.0) <= 200.0);
        }
        assert!(s.read_pressure(-50.0) >= 0.0);
    }

    #[test]
    fn seeded_stream_is_reproducible() {
        let model = SensorModel { rng_seed: 42, ..Default::default() };
        let mut a = PressureSensor::new(model).unwrap();
        let mut b = PressureSensor::new(model).unwrap();
        let ra: Vec<f64> = (0..100).map(|_| a.read_pressure(100.0)).collect();
        let rb: Vec<f64> = (0..100).map(|_| b.read_pressure(100.0)).collect();
        assert_eq!(ra, rb);
        assert!(ra.iter().any(|&r| r != ra[0]), "noise should vary readings");
    }
}
