//! CSV persistence for [`RunLog`].

use std::fmt::Write as _;
use std::path::Path;

use crate::control::{RunLog, RunSample};
use crate::error::{Error, Result};

pub const CSV_VERSION_LINE: &str = "# softbend-twin v1";

pub const CSV_COLUMNS: [&str; 13] = [
    "t_s",
    "desired_deg",
    "angle_true_deg",
    "angle_meas_deg",
    "pressure_kpa",
    "pressure_meas_kpa",
    "p_pred_kpa",
    "e_p_kpa",
    "e_alpha_deg",
    "valve_opening",
    "sma_power",
    "sma_temp_c",
    "sma_strain",
];

fn fields(s: &RunSample) -> [f64; 13] {
    [
        s.t_s,
        s.desired_deg,
        s.angle_true_deg,
        s.angle_meas_deg,
        s.pressure_kpa,
        s.pressure_meas_kpa,
        s.p_pred_kpa,
        s.e_p_kpa,
        s.e_alpha_deg,
        s.valve_opening,
        if s.sma_power { 1.0 } else { 0.0 },
        s.sma_temp_c,
        s.sma_strain,
    ]
}

/// Rounds `x` to the 6-decimal grid the CSV is written on.
pub fn quantize(x: f64) -> f64 {
    let q = (x * 1e6).round() / 1e6;
    if q == 0.0 { 0.0 } else { q }
}

/// Snaps every value of the log onto the CSV grid, so that writing and
/// re-reading it is lossless.
pub fn quantize_log(log: &RunLog) -> RunLog {
    let samples = log
        .samples
        .iter()
        .map(|s| RunSample {
            t_s: quantize(s.t_s),
            desired_deg: quantize(s.desired_deg),
            angle_true_deg: quantize(s.angle_true_deg),
            angle_meas_deg: quantize(s.angle_meas_deg),
            pressure_kpa: quantize(s.pressure_kpa),
            pressure_meas_kpa: quantize(s.pressure_meas_kpa),
            p_pred_kpa: quantize(s.p_pred_kpa),
            e_p_kpa: quantize(s.e_p_kpa),
            e_alpha_deg: quantize(s.e_alpha_deg),
            valve_opening: quantize(s.valve_opening),
            sma_power: s.sma_power,
            sma_temp_c: quantize(s.sma_temp_c),
            sma_strain: quantize(s.sma_strain),
        })
        .collect();
    RunLog { samples }
}

pub fn to_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(64 + log.len() * 160);
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for sample in &log.samples {
        for (i, v) in fields(sample).iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{:.6}", quantize(*v)).expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<RunLog> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l.trim() == CSV_VERSION_LINE => {}
        _ => return Err(Error::Parse(format!("line 1: expected `{CSV_VERSION_LINE}`"))),
    }
    let header = CSV_COLUMNS.join(",");
    match lines.next() {
        Some((_, l)) if l.trim() == header => {}
        Some((n, _)) => return Err(Error::Parse(format!("line {n}: unexpected column header"))),
        None => return Err(Error::Parse("line 2: missing column header".into())),
    }

    let mut samples: Vec<RunSample> = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut v = [0.0; 13];
        let mut count = 0;
        for (i, cell) in line.split(',').enumerate() {
            if i >= v.len() {
                count = i + 1;
                break;
            }
            v[i] = cell.trim().parse().map_err(|_| {
                Error::Parse(format!("line {n}: column `{}` is not a number: {cell:?}", CSV_COLUMNS[i]))
            })?;
            count = i + 1;
        }
        if count != v.len() {
            return Err(Error::Parse(format!("line {n}: expected 13 columns, found {count}")));
        }
        let sma_power = match v[10] {
            x if x == 0.0 => false,
            x if x == 1.0 => true,
            x => return Err(Error::Parse(format!("line {n}: sma_power must be 0 or 1, got {x}"))),
        };
        if let Some(prev) = samples.last() {
            if !(v[0] > prev.t_s) {
                return Err(Error::Parse(format!("line {n}: t_s must be strictly increasing")));
            }
        }
        samples.push(RunSample {
            t_s: v[0],
            desired_deg: v[1],
            angle_true_deg: v[2],
            angle_meas_deg: v[3],
            pressure_kpa: v[4],
            pressure_meas_kpa: v[5],
            p_pred_kpa: v[6],
            e_p_kpa: v[7],
            e_alpha_deg: v[8],
            valve_opening: v[9],
            sma_power,
            sma_temp_c: v[11],
            sma_strain: v[12],
        });
    }
    Ok(RunLog { samples })
}

pub fn write_csv(log: &RunLog, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(log))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<RunLog> {
    parse_csv(&std::fs::read_to_string(path)?)
}
