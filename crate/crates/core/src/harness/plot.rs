//! Self-contained SVG plot of measured and desired bending angle.

use std::fmt::Write as _;
use std::path::Path;

use crate::control::RunLog;
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

/// Renders the plot as an SVG document.
pub fn render_svg(log: &RunLog) -> Result<String> {
    let (Some(first), Some(last)) = (log.samples.first(), log.samples.last()) else {
        return Err(Error::Domain("cannot plot an empty log".into()));
    };
    let t0 = first.t_s;
    let span_t = (last.t_s - t0).max(1e-9);
    let peak = log
        .samples
        .iter()
        .map(|s| s.angle_meas_deg.max(s.desired_deg))
        .fold(0.0, f64::max);
    let top_deg = nice_ceiling(peak * 1.1);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + (t - t0) / span_t * plot_w;
    let y = |deg: f64| TOP + (1.0 - deg.clamp(0.0, top_deg) / top_deg) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for i in 0..=5 {
        let deg = top_deg * i as f64 / 5.0;
        let yy = y(deg);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{deg:.0}</text>"#,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    for i in 0..=7 {
        let t = t0 + span_t * i as f64 / 7.0;
        let xx = x(t);
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.2}" y="{:.2}" font-size="12" text-anchor="middle">{:.0}</text>"#,
            TOP + plot_h + 18.0,
            t - t0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">time (s)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {:.2})">bending angle (deg)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let trace = |value: &dyn Fn(usize) -> f64| {
        let mut pts = String::new();
        for (i, s) in log.samples.iter().enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", x(s.t_s), y(value(i)));
        }
        pts
    };
    let measured = trace(&|i| log.samples[i].angle_meas_deg);
    let desired = trace(&|i| log.samples[i].desired_deg);
    let _ = writeln!(
        svg,
        r#"<polyline id="measured" fill="none" stroke="green" stroke-width="1.5" points="{measured}"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<polyline id="desired" fill="none" stroke="red" stroke-width="1.5" points="{desired}"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="green">measured</text>"#,
        LEFT + 10.0,
        TOP + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="red">desired</text>"#,
        LEFT + 90.0,
        TOP + 16.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the plot to `path`. Nothing is created when the log is empty.
pub fn emit_plot(log: &RunLog, path: &Path) -> Result<()> {
    let svg = render_svg(log)?;
    std::fs::write(path, svg)?;
    Ok(())
}

fn nice_ceiling(v: f64) -> f64 {
    if !(v > 0.0) {
        return 10.0;
    }
    (v / 10.0).ceil() * 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::RunSample;

    #[test]
    fn constant_desired_trace_is_horizontal() {
        let samples = (0..100)
            .map(|k| RunSample {
                t_s: k as f64 * 0.1,
                desired_deg: 65.0,
                angle_true_deg: k as f64 * 0.5,
                angle_meas_deg: k as f64 * 0.5,
                pressure_kpa: 0.0,
                pressure_meas_kpa: 0.0,
                p_pred_kpa: 0.0,
                e_p_kpa: 0.0,
                e_alpha_deg: 0.0,
                valve_opening: 0.0,
                sma_power: false,
                sma_temp_c: 25.0,
                sma_strain: 0.0,
            })
            .collect();
        let svg = render_svg(&RunLog { samples }).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        let desired = svg.lines().find(|l| l.contains(r#"id="desired""#)).unwrap();
        let pts = desired.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn empty_log_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        assert!(emit_plot(&RunLog::default(), &path).is_err());
        assert!(!path.exists());
    }
}
