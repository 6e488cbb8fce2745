//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use softbend_core::control::{Camera, Mode, RunLog};
use softbend_core::harness::{
    compute_metrics_over, load_config, run_experiment, settling_time, ExperimentConfig,
};
use softbend_core::kinematics::{
    backbone_from_angle, bend_angle_from_triangle, triangle_from_backbone, ModuleGeometry,
};
use softbend_core::plant::{
    forward_angle, predict_pressure, Plant, PlantInputs, PlantParams, PneumaticParams,
};
use softbend_core::vision::{estimate_angle, CameraIntrinsics, DEFAULT_THRESHOLD};

const SUPPLY_LIMIT_KPA: f64 = 210.0;
const SENSOR_LIMIT_KPA: f64 = 200.0;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Peak chamber pressure and sensor reading over every closed-loop run.
#[derive(Default)]
struct Peaks {
    pressure_kpa: Cell<f64>,
    reading_kpa: Cell<f64>,
    runs: Cell<usize>,
}

impl Peaks {
    fn run(&self, cfg: &ExperimentConfig) -> RunLog {
        let log = run_experiment(cfg).expect("closed-loop run failed");
        for s in &log.samples {
            self.pressure_kpa.set(self.pressure_kpa.get().max(s.pressure_kpa));
            self.reading_kpa.set(self.reading_kpa.get().max(s.pressure_meas_kpa));
        }
        self.runs.set(self.runs.get() + 1);
        log
    }
}

fn scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/table5.cfg")
}

fn table5() -> ExperimentConfig {
    load_config(&scenario_path()).expect("scenarios/table5.cfg must parse")
}

fn vision_round_trip() -> Outcome {
    let start = Instant::now();
    let intr = CameraIntrinsics::default();
    let geom = ModuleGeometry::default();
    let mut clean_cam = Camera::new(intr, geom, DEFAULT_THRESHOLD, 0.0, 1).unwrap();
    let mut noisy_cam = Camera::new(intr, geom, DEFAULT_THRESHOLD, 10.0, 2).unwrap();
    let (mut worst_clean, mut worst_noisy) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for k in 1..=35 {
        let theta = 5.0 * k as f64;
        for (cam, worst, limit) in [
            (&mut clean_cam, &mut worst_clean, 2.0),
            (&mut noisy_cam, &mut worst_noisy, 3.0),
        ] {
            let frame = cam.capture(theta).unwrap();
            match estimate_angle(&frame, &intr, cam.threshold, cam.base_hint(), 0.0) {
                Ok(m) => {
                    let err = (m.angle_deg - theta).abs();
                    *worst = worst.max(err);
                    if err > limit {
                        failures.push(format!("{theta}: {err:.3}"));
                    }
                }
                Err(e) => failures.push(format!("{theta}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Outcome {
        pass: failures.is_empty() && elapsed < 30.0,
        detail: format!(
            "worst error {worst_clean:.3} deg noise-free, {worst_noisy:.3} deg at sigma 10, {elapsed:.1} s{}",
            if failures.is_empty() { String::new() } else { format!(", failing {failures:?}") }
        ),
    }
}

fn kinematic_round_trip() -> Outcome {
    let geom = ModuleGeometry::default();
    let mut worst = 0.0f64;
    let mut worst_at = 0.0;
    for k in 0..=180 {
        let theta = k as f64;
        let pose = backbone_from_angle(&geom, theta, 200).unwrap();
        let tri = triangle_from_backbone(&pose, geom.width_mm).unwrap();
        let err = (bend_angle_from_triangle(&tri).degrees - theta).abs();
        if err > worst {
            worst = err;
            worst_at = theta;
        }
    }
    Outcome { pass: worst <= 1e-6, detail: format!("worst error {worst:.3e} deg at {worst_at} deg") }
}

fn inverse_consistency() -> Outcome {
    let params = PneumaticParams::default();
    let mut misses = Vec::new();
    let mut worst_reachable = 0.0f64;
    for s in [0.0, 0.02, 0.04] {
        for k in 0..=18 {
            let alpha = 10.0 * k as f64;
            let p = predict_pressure(alpha, s, &params).unwrap();
            let err = (forward_angle(p.pressure_kpa, s, &params) - alpha).abs();
            if err > 0.01 {
                misses.push(format!("(alpha {alpha}, s {s}): off by {err:.2} deg"));
            } else {
                worst_reachable = worst_reachable.max(err);
            }
        }
    }
    Outcome {
        pass: misses.is_empty(),
        detail: format!(
            "57 pairs, worst passing residual {worst_reachable:.2e} deg{}",
            if misses.is_empty() { String::new() } else { format!("; {} misses {}", misses.len(), misses.join(", ")) }
        ),
    }
}

fn plant_anchors(peaks: &Peaks) -> Outcome {
    let full = forward_angle(210.0, 0.0, &PneumaticParams::default());
    let (p, r) = (peaks.pressure_kpa.get(), peaks.reading_kpa.get());
    Outcome {
        pass: full == 180.0 && p <= SUPPLY_LIMIT_KPA && r <= SENSOR_LIMIT_KPA,
        detail: format!(
            "forward(210 kPa, 0) = {full} deg; over {} closed-loop runs peak pressure {p:.3} kPa, peak reading {r:.3} kPa",
            peaks.runs.get()
        ),
    }
}

fn calibrated_scenario(peaks: &Peaks) -> Outcome {
    let base = table5().with_desired_angle(65.0).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (mode, rise_ok, band) in [
        (Mode::PneumaticOnly, (15.0, 25.0), 5.0),
        (Mode::Hybrid, (0.0, 5.0), 2.0),
    ] {
        let cfg = base.with_mode(mode).unwrap();
        let start = Instant::now();
        let log = peaks.run(&cfg);
        let elapsed = start.elapsed().as_secs_f64();
        let m = compute_metrics_over(&log, band, cfg.metrics_window_s).unwrap();
        let rise_in = m.rise_time_s.is_some_and(|r| r >= rise_ok.0 && r <= rise_ok.1);
        ok &= rise_in && m.error_band_deg <= band && elapsed < 10.0;
        parts.push(format!(
            "{mode}: rise {:?} s, band {:.3} deg, {elapsed:.1} s",
            m.rise_time_s, m.error_band_deg
        ));
    }
    Outcome { pass: ok, detail: parts.join("; ") }
}

fn ordering_sweep(peaks: &Peaks) -> Outcome {
    let base = table5();
    let mut violations = Vec::new();
    let (mut min_rise_gap, mut min_band_gap) = (f64::INFINITY, f64::INFINITY);
    for angle in [50.0, 55.0, 60.0, 65.0] {
        for seed in 0..10 {
            let cfg = base.with_desired_angle(angle).unwrap().with_seed(seed);
            let metrics = |mode| {
                let c = cfg.with_mode(mode).unwrap();
                compute_metrics_over(&peaks.run(&c), c.band_deg, c.metrics_window_s).unwrap()
            };
            let (pn, hy) = (metrics(Mode::PneumaticOnly), metrics(Mode::Hybrid));
            let rise_gap = match (pn.rise_time_s, hy.rise_time_s) {
                (Some(p), Some(h)) => p - h,
                (None, Some(_)) => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            };
            let band_gap = pn.error_band_deg - hy.error_band_deg;
            min_rise_gap = min_rise_gap.min(rise_gap);
            min_band_gap = min_band_gap.min(band_gap);
            if !(rise_gap > 0.0 && band_gap >= 0.0) {
                violations.push(format!(
                    "{angle} deg seed {seed}: rise {:?} vs {:?}, band {:.3} vs {:.3}",
                    hy.rise_time_s, pn.rise_time_s, hy.error_band_deg, pn.error_band_deg
                ));
            }
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "40 setpoint/seed pairs, smallest rise-time lead {min_rise_gap:.2} s, smallest band margin {min_band_gap:.3} deg{}",
            if violations.is_empty() { String::new() } else { format!("; violations: {}", violations.join("; ")) }
        ),
    }
}

fn command_fuzzing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut violations = 0usize;
    let mut first = None;
    let dt = 0.01;
    for seq in 0..1000 {
        let mut params = PlantParams::default();
        params.pneumatic.dead_time_s = rng.random_range(0.0..15.0);
        let mut plant = Plant::new(params).unwrap();
        let mut inputs = PlantInputs::default();
        let mut hold = 0usize;
        for _ in 0..6000 {
            if hold == 0 {
                inputs = PlantInputs {
                    valve_opening: rng.random_range(0.0..=1.0),
                    sma_power: rng.random_bool(0.5),
                };
                hold = rng.random_range(1..=300);
            }
            hold -= 1;
            let s = *plant.step(inputs, dt).unwrap();
            let ok = (0.0..=SUPPLY_LIMIT_KPA).contains(&s.pressure_kpa)
                && (0.0..=1.0).contains(&s.martensite_fraction)
                && (0.0..=0.04).contains(&s.sma_strain)
                && (0.0..=180.0).contains(&s.angle_true_deg);
            if !ok {
                violations += 1;
                first.get_or_insert((seq, s));
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: match first {
            None => "1000 sequences x 60 s, zero violations".into(),
            Some((seq, s)) => format!("{violations} violations, first in sequence {seq}: {s:?}"),
        },
    }
}

fn dt_convergence(peaks: &Peaks) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in [Mode::PneumaticOnly, Mode::Hybrid] {
        let coarse_cfg = ExperimentConfig::new(mode, 65.0);
        let mut fine_cfg = coarse_cfg.clone();
        fine_cfg.dt_s = 0.001;
        let (coarse, fine) = (peaks.run(&coarse_cfg), peaks.run(&fine_cfg));
        let worst = coarse
            .samples
            .iter()
            .zip(&fine.samples)
            .map(|(a, b)| (a.angle_true_deg - b.angle_true_deg).abs())
            .fold(0.0, f64::max);
        ok &= coarse.len() == fine.len() && worst < 0.5;
        parts.push(format!("{mode}: worst gap {worst:.4} deg over {} samples", coarse.len()));
    }
    Outcome { pass: ok, detail: parts.join("; ") }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_softbend"))
            .args(["simulate", "--config"])
            .arg(scenario_path())
            .arg("--out")
            .arg(&out)
            .args(["--seed", "42"])
            .output()
            .expect("failed to launch softbend");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("run.csv")).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    Outcome {
        pass: !a.is_empty() && a == b,
        detail: format!("two simulate runs, {} and {} bytes, identical: {}", a.len(), b.len(), a == b),
    }
}

fn convergence_sweep(peaks: &Peaks) -> Outcome {
    let mut misses = Vec::new();
    let mut worst_settle = 0.0f64;
    for mode in [Mode::PneumaticOnly, Mode::Hybrid] {
        for k in 0..12 {
            let angle = 10.0 + 5.0 * k as f64;
            let mut cfg = ExperimentConfig::new(mode, angle);
            cfg.sensor.noise_sigma_kpa = 0.0;
            cfg.camera.pixel_noise_sigma = 0.0;
            cfg.plant.pneumatic.dead_time_s = 0.0;
            let log = peaks.run(&cfg);
            match settling_time(&log, 0.5) {
                Some(t) if t <= 60.0 => worst_settle = worst_settle.max(t),
                other => {
                    let late = log.samples.iter().filter(|s| s.t_s >= 60.0 - 1e-9);
                    let band = late.map(|s| s.e_alpha_deg.abs()).fold(0.0, f64::max);
                    misses.push(format!(
                        "{mode} {angle}: settle {:?}, max |e| after 60 s {band:.3}",
                        other
                    ));
                }
            }
        }
    }
    Outcome {
        pass: misses.is_empty(),
        detail: format!(
            "24 runs, {} settled within 60 s (latest {worst_settle:.1} s){}",
            24 - misses.len(),
            if misses.is_empty() { String::new() } else { format!("; unsettled: {}", misses.join("; ")) }
        ),
    }
}

fn main() -> ExitCode {
    let peaks = Peaks::default();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        println!(
            "criterion {n:>2} {} {name}: {} ({:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        results.push((n, name, outcome));
    };
    record(1, "vision round-trip", &vision_round_trip);
    record(2, "kinematic round-trip", &kinematic_round_trip);
    record(3, "inverse-model consistency", &inverse_consistency);
    record(5, "calibrated comparison scenario", &|| calibrated_scenario(&peaks));
    record(6, "ordering across setpoints and seeds", &|| ordering_sweep(&peaks));
    record(7, "physical invariants under command fuzzing", &command_fuzzing);
    record(8, "dt convergence", &|| dt_convergence(&peaks));
    record(9, "CLI determinism", &cli_determinism);
    record(10, "steady-state convergence sweep", &|| convergence_sweep(&peaks));
    record(4, "plant anchors", &|| plant_anchors(&peaks));

    results.sort_by_key(|r| r.0);
    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!(", failed: {}", failed.join(", ")) }
    );
    if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
