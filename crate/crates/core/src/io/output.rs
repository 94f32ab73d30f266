//! Series CSV, snapshot JSON, sweep CSV and SVG traces. Reals are written in
//! the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::experiments::{ReportRow, RunReport, SweepCell};

pub const SERIES_HEADER: &str =
    "t,mean,l2_dev,sup_dev,h_half,grad_sup,dt,cert_margin,poincare_ok,agmon_ratio";

pub const SWEEP_HEADER: &str = "alpha_diff,amplitude,classification,status,max_grad,t_terminal,review";

fn real(v: f64) -> String {
    format!("{v:?}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn series_csv(report: &RunReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            real(r.t),
            real(r.mean),
            real(r.l2_dev),
            real(r.sup_dev),
            real(r.h_half),
            real(r.grad_sup),
            real(r.dt),
            real(r.cert_margin),
            r.poincare_ok,
            real(r.agmon_ratio)
        );
    }
    out
}

pub fn parse_series_csv(text: &str) -> std::result::Result<Vec<ReportRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SERIES_HEADER) => {}
        other => return Err(format!("bad header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 10 {
                return Err(format!("row {}: expected 10 cells, got {}", i + 1, cells.len()));
            }
            let f = |j: usize| {
                cells[j]
                    .parse::<f64>()
                    .map_err(|e| format!("row {} col {}: {e}", i + 1, j + 1))
            };
            Ok(ReportRow {
                t: f(0)?,
                mean: f(1)?,
                l2_dev: f(2)?,
                sup_dev: f(3)?,
                h_half: f(4)?,
                grad_sup: f(5)?,
                dt: f(6)?,
                cert_margin: f(7)?,
                poincare_ok: cells[8]
                    .parse()
                    .map_err(|e| format!("row {} col 9: {e}", i + 1))?,
                agmon_ratio: f(9)?,
            })
        })
        .collect()
}

pub fn write_series(report: &RunReport, path: &Path) -> Result<()> {
    write_text(path, &series_csv(report))
}

#[derive(Serialize)]
struct GridInfo {
    n: usize,
    #[serde(rename = "L")]
    half_length: f64,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    t: f64,
    grid: GridInfo,
    values: &'a [f64],
}

/// `{"t": .., "grid": {"n": .., "L": ..}, "values": [..]}`, values in grid
/// order from `x = -L`.
pub fn snapshot_json(state: &State) -> String {
    let grid = state.field.grid();
    let snap = Snapshot {
        t: state.time,
        grid: GridInfo {
            n: grid.n(),
            half_length: grid.half_length(),
        },
        values: state.field.values(),
    };
    serde_json::to_string(&snap).expect("plain data serializes")
}

pub fn write_snapshot(state: &State, path: &Path) -> Result<()> {
    write_text(path, &snapshot_json(state))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    write_text(path, &(text + "\n"))
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            real(c.alpha_diff),
            real(c.amplitude),
            c.classification,
            c.status.map_or("NONE", |s| s.as_str()),
            real(c.max_grad),
            real(c.t_terminal),
            c.review
        );
    }
    out
}

pub fn write_sweep(cells: &[SweepCell], path: &Path) -> Result<()> {
    write_text(path, &sweep_csv(cells))
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 50.0;

type Trace = (&'static str, &'static str, fn(&ReportRow) -> f64);

/// Log10 traces of `|dev|_0`, `|dev|_inf` and `|d_x|_inf` against `t`.
pub fn plot_svg(report: &RunReport) -> String {
    let traces: [Trace; 3] = [
        ("l2_dev", "#1f77b4", |r| r.l2_dev),
        ("sup_dev", "#2ca02c", |r| r.sup_dev),
        ("grad_sup", "#d62728", |r| r.grad_sup),
    ];
    let pts: Vec<Vec<(f64, f64)>> = traces
        .iter()
        .map(|(_, _, pick)| {
            report
                .rows
                .iter()
                .filter(|r| pick(r) > 0.0 && pick(r).is_finite())
                .map(|r| (r.t, pick(r).log10()))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in all {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !t0.is_finite() {
        (t0, t1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (PLOT_W - 2.0 * MARGIN);
    let sy = |y: f64| PLOT_H - MARGIN - (y - y0) / (y1 - y0) * (PLOT_H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        PLOT_W - 2.0 * MARGIN,
        PLOT_H - 2.0 * MARGIN
    );
    for (i, ((name, colour, _), p)) in traces.iter().zip(&pts).enumerate() {
        if !p.is_empty() {
            let coords: Vec<String> = p
                .iter()
                .map(|&(t, y)| format!("{:.2},{:.2}", sx(t), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{colour}">log10 {name}</text>"#,
            MARGIN + 10.0 + 130.0 * i as f64,
            MARGIN - 10.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}" font-size="12">t = {t0:.3}</text>"#,
        PLOT_H - MARGIN + 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">t = {t1:.3}</text>"#,
        PLOT_W - MARGIN,
        PLOT_H - MARGIN + 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="5" y="{}" font-size="12">{y1:.2}</text>"#,
        MARGIN + 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="5" y="{}" font-size="12">{y0:.2}</text>"#,
        PLOT_H - MARGIN + 4.0
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_plot(report: &RunReport, path: &Path) -> Result<()> {
    write_text(path, &plot_svg(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Model, ModelParams};
    use crate::spectral::{make_grid, Field};
    use crate::timestepper::{integrate, StepperConfig};
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams::new(Model::KellerSegel, 1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = RunReport::new(&params(), &StepperConfig::new(1.0));
        assert_eq!(series_csv(&r), format!("{SERIES_HEADER}\n"));
    }

    #[test]
    fn series_round_trips_bit_exactly() {
        let g = make_grid(64, PI).unwrap();
        let u0 = Field::from_fn(&g, |x| 0.5 + 3.0 * x.cos() + 0.1 * (5.0 * x).sin());
        let mut r = integrate(&State::new(u0, 0.0), &params(), &StepperConfig::new(1.0), &mut []).unwrap();
        r.rows[3].cert_margin = -0.0;
        r.rows[4].cert_margin = 1e-300;
        r.rows[5].agmon_ratio = f64::INFINITY;
        let back = parse_series_csv(&series_csv(&r)).unwrap();
        assert_eq!(back.len(), r.rows.len());
        for (a, b) in back.iter().zip(&r.rows) {
            let bits = |x: &ReportRow| {
                [x.t, x.mean, x.l2_dev, x.sup_dev, x.h_half, x.grad_sup, x.dt, x.cert_margin, x.agmon_ratio]
                    .map(f64::to_bits)
            };
            assert_eq!(bits(a), bits(b));
            assert_eq!(a.poincare_ok, b.poincare_ok);
        }
    }

    #[test]
    fn snapshot_of_homogeneous_state() {
        let g = make_grid(16, PI).unwrap();
        let s = State::new(Field::constant(&g, 0.5), 1.5);
        let v: serde_json::Value = serde_json::from_str(&snapshot_json(&s)).unwrap();
        assert_eq!(v["t"], 1.5);
        assert_eq!(v["grid"]["n"], 16);
        assert_eq!(v["grid"]["L"].as_f64().unwrap(), PI);
        let vals = v["values"].as_array().unwrap();
        assert_eq!(vals.len(), 16);
        assert!(vals.iter().all(|x| x.as_f64() == Some(0.5)));
    }

    #[test]
    fn snapshot_values_start_at_minus_l() {
        let g = make_grid(16, PI).unwrap();
        let s = State::new(Field::from_fn(&g, |x| x), 0.0);
        let v: serde_json::Value = serde_json::from_str(&snapshot_json(&s)).unwrap();
        assert_eq!(v["values"][0].as_f64().unwrap(), -PI);
    }

    #[test]
    fn plot_is_well_formed_text() {
        let g = make_grid(32, PI).unwrap();
        let u0 = Field::from_fn(&g, |x| 0.5 + x.cos());
        let r = integrate(&State::new(u0, 0.0), &params(), &StepperConfig::new(1.0), &mut []).unwrap();
        let svg = plot_svg(&r);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        let empty = plot_svg(&RunReport::new(&params(), &StepperConfig::new(1.0)));
        assert_eq!(empty.matches("<polyline").count(), 0);
    }

    #[test]
    fn writers_report_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let r = RunReport::new(&params(), &StepperConfig::new(1.0));
        let err = write_series(&r, &blocker.join("series.csv")).unwrap_err();
        assert!(err.to_string().contains("file"));
        let ok = dir.path().join("nested/out.csv");
        write_series(&r, &ok).unwrap();
        assert_eq!(fs::read_to_string(ok).unwrap(), format!("{SERIES_HEADER}\n"));
    }
}
