//! Line-based scenario configuration.
//!
//! ```text
//! # comment
//! mode = hybrid
//! desired_angle_deg = 65
//! plant.supply_kpa = 210
//! pneumatic_only.plant.dead_time_s = 14
//! ```
//!
//! Keys may carry a `pneumatic_only.` or `hybrid.` prefix; such entries only
//! apply when the experiment runs in that mode.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::control::{ControllerConfig, Mode};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::kinematics::ModuleGeometry;
use crate::plant::{DeadTimeModel, PlantParams, SensorModel};
use crate::vision::{CameraIntrinsics, DEFAULT_THRESHOLD};

/// Camera block: intrinsics plus the pipeline settings the loop uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub threshold: u8,
    pub pixel_noise_sigma: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            threshold: DEFAULT_THRESHOLD,
            pixel_noise_sigma: 0.0,
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub mode: Mode,
    pub desired_angle_deg: f64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub rng_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub controller: ControllerConfig,
    pub camera: CameraConfig,
    pub sensor: SensorModel,
    pub plant: PlantParams,
    pub geometry: ModuleGeometry,
    /// Error band a run must stay within over the metrics window to count
    /// as settled.
    pub band_deg: f64,
    pub metrics_window_s: f64,
    source: Vec<Entry>,
    overrides: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    mode: Option<Mode>,
    key: String,
    value: String,
}

impl ExperimentConfig {
    /// Default configuration for `mode` at `desired_angle_deg`.
    pub fn new(mode: Mode, desired_angle_deg: f64) -> Self {
        Self {
            scenario: "default".into(),
            mode,
            desired_angle_deg,
            duration_s: 70.0,
            dt_s: 0.01,
            rng_seed: 0,
            output_dir: None,
            controller: ControllerConfig::new(mode, desired_angle_deg),
            camera: CameraConfig::default(),
            sensor: SensorModel::default(),
            plant: PlantParams::default(),
            geometry: ModuleGeometry::default(),
            band_deg: 5.0,
            metrics_window_s: 20.0,
            source: Vec::new(),
            overrides: Vec::new(),
        }
    }

    /// Re-resolves the same configuration text for another mode, applying
    /// that mode's prefixed overrides instead of the current ones.
    pub fn with_mode(&self, mode: Mode) -> Result<Self> {
        if self.source.is_empty() {
            let mut cfg = self.clone();
            cfg.mode = mode;
            cfg.controller.mode = mode;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut cfg = resolve(&self.source, Some(mode), &self.overrides)?;
        cfg.output_dir.clone_from(&self.output_dir);
        Ok(cfg)
    }

    /// Same scenario with a different desired angle.
    pub fn with_desired_angle(&self, desired_angle_deg: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.desired_angle_deg = desired_angle_deg;
        cfg.controller.desired_angle_deg = desired_angle_deg;
        cfg.remember("desired_angle_deg", desired_angle_deg.to_string());
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same scenario with a different seed.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.rng_seed = rng_seed;
        cfg.sensor.rng_seed = rng_seed;
        cfg.remember("rng_seed", rng_seed.to_string());
        cfg
    }

    /// Same scenario with a different run length.
    pub fn with_duration(&self, duration_s: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.duration_s = duration_s;
        cfg.remember("duration_s", duration_s.to_string());
        cfg.validate()?;
        Ok(cfg)
    }

    /// Records a programmatic change so that [`Self::with_mode`] keeps it.
    fn remember(&mut self, key: &str, value: String) {
        self.overrides.retain(|e| e.key != key);
        self.overrides.push(Entry { line: 0, mode: None, key: key.to_string(), value });
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.dt_s > 0.0 && self.dt_s <= self.controller.control_period_s) {
            return Err(Error::InvalidParameter(format!(
                "dt_s must lie in (0, controller.control_period_s = {}], got {}",
                self.controller.control_period_s, self.dt_s
            )));
        }
        let substeps = self.controller.control_period_s / self.dt_s;
        if (substeps - substeps.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "dt_s = {} must divide controller.control_period_s = {}",
                self.dt_s, self.controller.control_period_s
            )));
        }
        if !(self.band_deg >= 0.0) || !(self.metrics_window_s > 0.0) {
            return Err(Error::InvalidParameter(
                "metrics.band_deg must be non-negative and metrics.window_s positive".into(),
            ));
        }
        if !(self.camera.pixel_noise_sigma >= 0.0 && self.camera.pixel_noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "camera.pixel_noise_sigma must be non-negative, got {}",
                self.camera.pixel_noise_sigma
            )));
        }
        self.controller.validate()?;
        self.camera.intrinsics.validate()?;
        self.sensor.validate()?;
        self.plant.validate()?;
        self.geometry.validate()?;
        Ok(())
    }
}

/// Parses and validates a configuration; the `mode` key selects which
/// prefixed overrides apply.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let entries = tokenize(text)?;
    resolve(&entries, None, &[])
}

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut seen: HashMap<(Option<Mode>, String), usize> = HashMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse(format!("line {line}: expected `key = value`, got {content:?}")));
        };
        let (key, value) = (key.trim(), unquote(value.trim()));
        if key.is_empty() {
            return Err(Error::Parse(format!("line {line}: missing key before `=`")));
        }
        if value.is_empty() {
            return Err(Error::Parse(format!("line {line}: missing value for `{key}`")));
        }
        let (mode, bare) = split_mode_prefix(key);
        if !KEYS.contains(&bare) {
            return Err(Error::Parse(format!("line {line}: unknown key `{key}`")));
        }
        if mode.is_some() && (bare == "mode" || bare == "scenario") {
            return Err(Error::Parse(format!("line {line}: `{bare}` cannot be set per mode")));
        }
        if let Some(first) = seen.insert((mode, bare.to_string()), line) {
            return Err(Error::Parse(format!(
                "line {line}: duplicate key `{key}` (first set on line {first})"
            )));
        }
        entries.push(Entry { line, mode, key: bare.to_string(), value: value.to_string() });
    }
    Ok(entries)
}

fn unquote(value: &str) -> &str {
    value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value)
}

fn split_mode_prefix(key: &str) -> (Option<Mode>, &str) {
    for mode in [Mode::PneumaticOnly, Mode::Hybrid] {
        if let Some(rest) = key.strip_prefix(mode.name()).and_then(|r| r.strip_prefix('.')) {
            return (Some(mode), rest);
        }
    }
    (None, key)
}

fn resolve(entries: &[Entry], forced_mode: Option<Mode>, overrides: &[Entry]) -> Result<ExperimentConfig> {
    let find = |key: &str| entries.iter().find(|e| e.mode.is_none() && e.key == key);
    let end_line = entries.last().map_or(1, |e| e.line + 1);
    let mode_entry = find("mode");
    let mode = match (forced_mode, mode_entry) {
        (Some(m), _) => m,
        (None, Some(e)) => parse_value::<Mode>(e)?,
        (None, None) => {
            return Err(Error::Parse(format!("line {end_line}: missing required key `mode`")))
        }
    };
    let Some(angle_entry) = find("desired_angle_deg") else {
        return Err(Error::Parse(format!(
            "line {end_line}: missing required key `desired_angle_deg`"
        )));
    };
    let desired = parse_value::<f64>(angle_entry)?;

    let mut cfg = ExperimentConfig::new(mode, desired);
    let mut origin = cfg.camera.intrinsics.origin_px;
    for pass_mode in [None, Some(mode)] {
        for entry in entries.iter().filter(|e| e.mode == pass_mode) {
            apply(&mut cfg, &mut origin, entry)?;
        }
    }
    for entry in overrides {
        apply(&mut cfg, &mut origin, entry)?;
    }
    cfg.camera.intrinsics.origin_px = origin;
    cfg.controller.mode = mode;
    cfg.controller.desired_angle_deg = cfg.desired_angle_deg;
    cfg.sensor.rng_seed = cfg.rng_seed;
    cfg.source = entries.to_vec();
    cfg.overrides = overrides.to_vec();

    cfg.validate().map_err(|err| locate(err, entries, mode))?;
    Ok(cfg)
}

/// Prefixes a validation error with the line of the key it names.
fn locate(err: Error, entries: &[Entry], mode: Mode) -> Error {
    let Error::InvalidParameter(msg) = err else { return err };
    let mut candidates: Vec<&Entry> = entries
        .iter()
        .filter(|e| e.mode.is_none() || e.mode == Some(mode))
        .filter(|e| mentions(&msg, &e.key))
        .collect();
    candidates.sort_by_key(|e| (e.mode.is_none(), std::cmp::Reverse(e.key.len())));
    match candidates.first() {
        Some(e) => Error::InvalidParameter(format!("line {}: {msg}", e.line)),
        None => Error::InvalidParameter(msg),
    }
}

fn mentions(msg: &str, key: &str) -> bool {
    msg.match_indices(key).any(|(at, _)| {
        let before = msg[..at].chars().next_back();
        let after = msg[at + key.len()..].chars().next();
        let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '.');
        !word(before) && !word(after)
    })
}

fn parse_value<T: FromStr>(entry: &Entry) -> Result<T> {
    entry.value.parse::<T>().map_err(|_| {
        Error::Parse(format!(
            "line {}: invalid value {:?} for `{}`",
            entry.line, entry.value, entry.key
        ))
    })
}

const KEYS: &[&str] = &[
    "scenario",
    "mode",
    "desired_angle_deg",
    "duration_s",
    "dt_s",
    "rng_seed",
    "output_dir",
    "controller.angle_deadband_deg",
    "controller.pressure_deadband_kpa",
    "controller.control_period_s",
    "controller.stepper_rate_steps_per_s",
    "controller.steps_full_travel",
    "camera.width_px",
    "camera.height_px",
    "camera.mm_per_px",
    "camera.origin_x_px",
    "camera.origin_y_px",
    "camera.frame_rate_hz",
    "camera.threshold",
    "camera.pixel_noise_sigma",
    "sensor.pressure_range_min_kpa",
    "sensor.pressure_range_max_kpa",
    "sensor.pressure_noise_sigma_kpa",
    "sensor.pressure_quantization_bits",
    "plant.supply_kpa",
    "plant.fill_rate_per_s",
    "plant.leak_rate_per_s",
    "plant.dead_time_s",
    "plant.dead_time_model",
    "plant.threshold_kpa",
    "plant.gain_deg_per_kpa",
    "plant.sma_gain_deg_per_strain",
    "plant.alpha_max_deg",
    "plant.ambient_c",
    "sma.diameter_mm",
    "sma.length_mm",
    "sma.poisson_ratio",
    "sma.max_recovery_strain",
    "sma.austenite_start_c",
    "sma.austenite_finish_c",
    "sma.martensite_start_c",
    "sma.martensite_finish_c",
    "sma.resistance_ohm_per_m",
    "sma.heat_capacity_j_per_kg_k",
    "sma.density_kg_m3",
    "sma.convection_w_per_m2_k",
    "sma.drive_current_a",
    "geometry.length_mm",
    "geometry.width_mm",
    "geometry.cap_thickness_mm",
    "geometry.upper_thickness_mm",
    "geometry.bottom_thickness_mm",
    "geometry.inner_radius_mm",
    "metrics.band_deg",
    "metrics.window_s",
];

fn apply(cfg: &mut ExperimentConfig, origin: &mut Vec2, e: &Entry) -> Result<()> {
    let f = || parse_value::<f64>(e);
    let pn = &mut cfg.plant.pneumatic;
    let sma = &mut cfg.plant.sma;
    let geom = &mut cfg.geometry;
    match e.key.as_str() {
        "scenario" => cfg.scenario = e.value.clone(),
        "mode" => {
            parse_value::<Mode>(e)?;
        }
        "desired_angle_deg" => cfg.desired_angle_deg = f()?,
        "duration_s" => cfg.duration_s = f()?,
        "dt_s" => cfg.dt_s = f()?,
        "rng_seed" => cfg.rng_seed = parse_value(e)?,
        "output_dir" => cfg.output_dir = Some(PathBuf::from(&e.value)),
        "controller.angle_deadband_deg" => cfg.controller.angle_deadband_deg = f()?,
        "controller.pressure_deadband_kpa" => cfg.controller.pressure_deadband_kpa = f()?,
        "controller.control_period_s" => cfg.controller.control_period_s = f()?,
        "controller.stepper_rate_steps_per_s" => cfg.controller.stepper_rate_steps_per_s = f()?,
        "controller.steps_full_travel" => cfg.controller.steps_full_travel = parse_value(e)?,
        "camera.width_px" => cfg.camera.intrinsics.width_px = parse_value(e)?,
        "camera.height_px" => cfg.camera.intrinsics.height_px = parse_value(e)?,
        "camera.mm_per_px" => cfg.camera.intrinsics.mm_per_px = f()?,
        "camera.origin_x_px" => origin.x = f()?,
        "camera.origin_y_px" => origin.y = f()?,
        "camera.frame_rate_hz" => cfg.camera.intrinsics.frame_rate_hz = f()?,
        "camera.threshold" => cfg.camera.threshold = parse_value(e)?,
        "camera.pixel_noise_sigma" => cfg.camera.pixel_noise_sigma = f()?,
        "sensor.pressure_range_min_kpa" => cfg.sensor.range_min_kpa = f()?,
        "sensor.pressure_range_max_kpa" => cfg.sensor.range_max_kpa = f()?,
        "sensor.pressure_noise_sigma_kpa" => cfg.sensor.noise_sigma_kpa = f()?,
        "sensor.pressure_quantization_bits" => cfg.sensor.quantization_bits = parse_value(e)?,
        "plant.supply_kpa" => pn.supply_kpa = f()?,
        "plant.fill_rate_per_s" => pn.fill_rate_per_s = f()?,
        "plant.leak_rate_per_s" => pn.leak_rate_per_s = f()?,
        "plant.dead_time_s" => pn.dead_time_s = f()?,
        "plant.dead_time_model" => pn.dead_time_model = parse_value::<DeadTimeModel>(e)?,
        "plant.threshold_kpa" => pn.threshold_kpa = f()?,
        "plant.gain_deg_per_kpa" => pn.gain_deg_per_kpa = f()?,
        "plant.sma_gain_deg_per_strain" => pn.sma_gain_deg_per_strain = f()?,
        "plant.alpha_max_deg" => pn.alpha_max_deg = f()?,
        "plant.ambient_c" => cfg.plant.ambient_c = f()?,
        "sma.diameter_mm" => sma.diameter_mm = f()?,
        "sma.length_mm" => sma.length_mm = f()?,
        "sma.poisson_ratio" => sma.poisson_ratio = f()?,
        "sma.max_recovery_strain" => sma.max_recovery_strain = f()?,
        "sma.austenite_start_c" => sma.austenite_start_c = f()?,
        "sma.austenite_finish_c" => sma.austenite_finish_c = f()?,
        "sma.martensite_start_c" => sma.martensite_start_c = f()?,
        "sma.martensite_finish_c" => sma.martensite_finish_c = f()?,
        "sma.resistance_ohm_per_m" => sma.resistance_ohm_per_m = f()?,
        "sma.heat_capacity_j_per_kg_k" => sma.heat_capacity_j_per_kg_k = f()?,
        "sma.density_kg_m3" => sma.density_kg_m3 = f()?,
        "sma.convection_w_per_m2_k" => sma.convection_w_per_m2_k = f()?,
        "sma.drive_current_a" => sma.drive_current_a = f()?,
        "geometry.length_mm" => geom.length_mm = f()?,
        "geometry.width_mm" => geom.width_mm = f()?,
        "geometry.cap_thickness_mm" => geom.cap_thickness_mm = f()?,
        "geometry.upper_thickness_mm" => geom.upper_thickness_mm = f()?,
        "geometry.bottom_thickness_mm" => geom.bottom_thickness_mm = f()?,
        "geometry.inner_radius_mm" => geom.inner_radius_mm = f()?,
        "metrics.band_deg" => cfg.band_deg = f()?,
        "metrics.window_s" => cfg.metrics_window_s = f()?,
        other => unreachable!("key `{other}` passed the key table but has no setter"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("mode = hybrid\ndesired_angle_deg = 65\n").unwrap();
        assert_eq!(cfg.mode, Mode::Hybrid);
        assert_eq!(cfg.desired_angle_deg, 65.0);
        assert_eq!(cfg.duration_s, 70.0);
        assert_eq!(cfg.dt_s, 0.01);
        assert_eq!(cfg.controller, ControllerConfig::new(Mode::Hybrid, 65.0));
        assert_eq!(cfg.plant, PlantParams::default());
        assert_eq!(cfg.geometry, ModuleGeometry::default());
    }

    #[test]
    fn desired_angle_out_of_range_names_its_line() {
        let err = parse_config("mode = hybrid\n\ndesired_angle_deg = 80\n").unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_config("mode = hybrid\ndesired_angle_deg = 60\nmode = hybrid\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn unknown_and_missing_keys() {
        let err = parse_config("mode = hybrid\ndesired_angle_deg = 60\nplant.colour = red\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
        let err = parse_config("desired_angle_deg = 60\n").unwrap_err();
        assert!(err.to_string().contains("mode"));
        let err = parse_config("mode = hybrid\n").unwrap_err();
        assert!(err.to_string().contains("desired_angle_deg"));
        let err = parse_config("mode = hybrid\ndesired_angle_deg 60\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn comments_prefixes_and_mode_overrides() {
        let text = "\
# scenario file
mode = pneumatic_only   # trailing comment
desired_angle_deg = 65
plant.supply_kpa = 200
pneumatic_only.plant.dead_time_s = 14
hybrid.plant.dead_time_s = 0
hybrid.metrics.band_deg = 2
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.plant.pneumatic.supply_kpa, 200.0);
        assert_eq!(cfg.plant.pneumatic.dead_time_s, 14.0);
        assert_eq!(cfg.band_deg, 5.0);
        let hybrid = cfg.with_mode(Mode::Hybrid).unwrap();
        assert_eq!(hybrid.mode, Mode::Hybrid);
        assert_eq!(hybrid.controller.mode, Mode::Hybrid);
        assert_eq!(hybrid.plant.pneumatic.dead_time_s, 0.0);
        assert_eq!(hybrid.plant.pneumatic.supply_kpa, 200.0);
        assert_eq!(hybrid.band_deg, 2.0);
    }

    #[test]
    fn programmatic_changes_survive_mode_switch() {
        let text = "mode = hybrid\ndesired_angle_deg = 65\nrng_seed = 3\nhybrid.plant.dead_time_s = 1\n";
        let cfg = parse_config(text).unwrap().with_desired_angle(50.0).unwrap().with_seed(7);
        let cfg = cfg.with_duration(40.0).unwrap();
        for mode in [Mode::PneumaticOnly, Mode::Hybrid] {
            let c = cfg.with_mode(mode).unwrap();
            assert_eq!(c.desired_angle_deg, 50.0);
            assert_eq!(c.controller.desired_angle_deg, 50.0);
            assert_eq!((c.rng_seed, c.sensor.rng_seed), (7, 7));
            assert_eq!(c.duration_s, 40.0);
        }
        assert_eq!(cfg.with_mode(Mode::Hybrid).unwrap().plant.pneumatic.dead_time_s, 1.0);
        assert!(cfg.with_desired_angle(90.0).is_err());
    }

    #[test]
    fn validation_errors_point_at_nested_keys() {
        let err = parse_config("mode = hybrid\ndesired_angle_deg = 60\nsma.max_recovery_strain = 0.2\n")
            .unwrap_err();
        assert!(err.to_string().starts_with("invalid parameter: line 3"), "{err}");
        let err = parse_config("mode = hybrid\ndesired_angle_deg = 60\ndt_s = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn bad_values_are_parse_errors() {
        let err = parse_config("mode = both\ndesired_angle_deg = 60\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let err = parse_config("mode = hybrid\ndesired_angle_deg = sixty\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
