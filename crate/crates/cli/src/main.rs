use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softbend_core::control::Mode;
use softbend_core::harness::{
    self, compare_scenario, compute_metrics_over, emit_plot, load_config, read_csv,
    ComparisonReport, ExperimentConfig, Metrics,
};
use softbend_core::vision::{estimate_angle, read_pgm, CameraIntrinsics, DEFAULT_THRESHOLD};
use softbend_core::{Error, Vec2};

#[derive(Parser)]
#[command(name = "softbend", version, about = "Soft bending module twin: simulate, compare, measure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment, write its CSV log and print metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario in both modes and report the comparison.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare both modes over a matrix of desired angles and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the bend angle in a binary PGM (P5) frame.
    EstimateAngle {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        /// Image scale in mm per pixel.
        #[arg(long)]
        scale: Option<f64>,
        /// Approximate module base in pixels, as `x,y`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        base: Option<Vec<f64>>,
    },
    /// Plot a CSV run log as SVG.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Parse(_) | Error::InvalidParameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, out, seed } => simulate(&config, out, seed),
        Command::Compare { config, out } => compare(&config, out),
        Command::Sweep { config, angles, seeds, out } => sweep(&config, &angles, seeds, out),
        Command::EstimateAngle { image, threshold, scale, base } => {
            estimate(&image, threshold, scale, base)
        }
        Command::Plot { log, out } => {
            let log = read_csv(&log)?;
            emit_plot(&log, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn simulate(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    let run = harness::simulate(&cfg)?;
    let metrics = compute_metrics_over(&run.log, cfg.band_deg, cfg.metrics_window_s)?;
    let summary = metrics_summary(&cfg, &metrics, run.dropouts);
    print!("{summary}");
    if let Some(dir) = &cfg.output_dir {
        fs::write(dir.join("metrics.txt"), &summary)?;
        println!("wrote {}", dir.join(harness::RUN_LOG_FILE).display());
    }
    Ok(())
}

fn metrics_summary(cfg: &ExperimentConfig, m: &Metrics, dropouts: usize) -> String {
    let rise = m.rise_time_s.map_or_else(|| "none".to_string(), |v| format!("{v:.6}"));
    format!(
        "scenario = {}\nmode = {}\ndesired_angle_deg = {:.6}\nrng_seed = {}\nrise_time_s = {rise}\n\
         steady_state_error_deg = {:.6}\nerror_band_deg = {:.6}\novershoot_deg = {:.6}\n\
         band_deg = {:.6}\nsettled = {}\nvision_dropouts = {dropouts}\n",
        cfg.scenario,
        cfg.mode,
        cfg.desired_angle_deg,
        cfg.rng_seed,
        m.steady_state_error_deg,
        m.error_band_deg,
        m.overshoot_deg,
        m.band_deg,
        m.settled,
    )
}

fn per_mode(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<[ExperimentConfig; 2], Error> {
    let mut pair = [cfg.with_mode(Mode::PneumaticOnly)?, cfg.with_mode(Mode::Hybrid)?];
    for c in &mut pair {
        c.output_dir = out.map(|dir| dir.join(c.mode.name()));
    }
    Ok(pair)
}

fn compare(config: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let mut cfg = load_config(config)?;
    let out = out.or(cfg.output_dir.take());
    let [pn, hy] = per_mode(&cfg, out.as_deref())?;
    let report = harness::compare_modes(&pn, &hy)?;
    println!("{report}");
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("comparison.txt"), report.to_key_value())?;
        println!("wrote {}", dir.join("comparison.txt").display());
    }
    Ok(())
}

fn sweep(config: &Path, angles: &[f64], seeds: u64, out: Option<PathBuf>) -> Result<(), Error> {
    if seeds == 0 {
        return Err(Error::InvalidParameter("--seeds must be at least 1".into()));
    }
    let mut base = load_config(config)?;
    let out = out.or(base.output_dir.take());
    let mut table = String::from(
        "desired_angle_deg,rng_seed,pneumatic_rise_s,pneumatic_band_deg,hybrid_rise_s,hybrid_band_deg,ordering_holds\n",
    );
    println!(
        "{:>8} {:>5} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "angle", "seed", "pn rise", "pn band", "hy rise", "hy band", "ordering"
    );
    let mut failures = 0;
    for &angle in angles {
        for seed in 0..seeds {
            let cfg = base.with_desired_angle(angle)?.with_seed(seed);
            let run_dir = out.as_ref().map(|d| d.join(format!("angle_{angle}")).join(format!("seed_{seed}")));
            let report = match &run_dir {
                Some(dir) => {
                    let [pn, hy] = per_mode(&cfg, Some(dir))?;
                    harness::compare_modes(&pn, &hy)?
                }
                None => compare_scenario(&cfg)?,
            };
            failures += usize::from(!report.ordering_holds());
            print_row(angle, seed, &report);
            table.push_str(&row_csv(angle, seed, &report));
        }
    }
    println!("ordering held in {} of {} runs", angles.len() * seeds as usize - failures, angles.len() * seeds as usize);
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), table)?;
    }
    Ok(())
}

fn fmt_rise(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |v| format!("{v:.2}"))
}

fn print_row(angle: f64, seed: u64, r: &ComparisonReport) {
    println!(
        "{:>8.1} {:>5} {:>10} {:>10.3} {:>10} {:>10.3} {:>9}",
        angle,
        seed,
        fmt_rise(r.pneumatic_only.rise_time_s),
        r.pneumatic_only.error_band_deg,
        fmt_rise(r.hybrid.rise_time_s),
        r.hybrid.error_band_deg,
        r.ordering_holds()
    );
}

fn row_csv(angle: f64, seed: u64, r: &ComparisonReport) -> String {
    format!(
        "{angle:.6},{seed},{},{:.6},{},{:.6},{}\n",
        fmt_rise(r.pneumatic_only.rise_time_s),
        r.pneumatic_only.error_band_deg,
        fmt_rise(r.hybrid.rise_time_s),
        r.hybrid.error_band_deg,
        r.ordering_holds()
    )
}

fn estimate(image: &Path, threshold: u8, scale: Option<f64>, base: Option<Vec<f64>>) -> Result<(), Error> {
    let frame = read_pgm(image)?;
    let defaults = CameraIntrinsics::default();
    let cam = CameraIntrinsics {
        width_px: frame.width(),
        height_px: frame.height(),
        mm_per_px: scale.unwrap_or(defaults.mm_per_px),
        ..defaults
    };
    cam.validate()?;
    let hint = match base.as_deref() {
        Some([x, y]) => Vec2::new(*x, *y),
        _ => Vec2::new(
            defaults.origin_px.x.min(frame.width() as f64 - 1.0),
            defaults.origin_px.y.min(frame.height() as f64 - 1.0),
        ),
    };
    let m = estimate_angle(&frame, &cam, threshold, hint, 0.0)?;
    println!("{:.3}", m.angle_deg);
    Ok(())
}
