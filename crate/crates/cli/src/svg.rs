//! Line plots of a sweep as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::SolverKind;
use crate::error::{CliError, Result};
use crate::sweep::SweepRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotField {
    Rate,
    Gap,
}

impl PlotField {
    fn label(self) -> &'static str {
        match self {
            PlotField::Rate => "design rate",
            PlotField::Gap => "gap to capacity",
        }
    }

    fn value(self, row: &SweepRow) -> Option<f64> {
        match self {
            PlotField::Rate => row.rate,
            PlotField::Gap => row.gap,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;

fn color(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::Lp => "#1f77b4",
        SolverKind::Sdp => "#d62728",
    }
}

/// Step of 1, 2 or 5 times a power of ten giving about `target` intervals.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

/// Axis range widened to tick multiples, plus the ticks.
fn axis(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-9 {
        (lo - 0.05, hi + 0.05)
    } else {
        (lo, hi)
    };
    let step = nice_step(hi - lo, 5);
    let start = (lo / step - 1e-9).floor() * step;
    let end = (hi / step + 1e-9).ceil() * step;
    let count = ((end - start) / step).round() as usize;
    let ticks = (0..=count).map(|k| start + k as f64 * step).collect();
    (start, end, ticks)
}

/// Fixed two-decimal labels; `-0.00` is printed as `0.00`.
fn label(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// SVG text for `field` against alpha, one polyline per solver.
/// Only optimal rows are drawn.
pub fn render_svg(rows: &[SweepRow], field: PlotField) -> Result<String> {
    let points: Vec<(SolverKind, f64, f64)> = rows
        .iter()
        .filter(|r| r.is_plottable())
        .filter_map(|r| field.value(r).filter(|v| v.is_finite()).map(|v| (r.solver, r.alpha, v)))
        .collect();
    if points.is_empty() {
        return Err(CliError::NoPlottableRows);
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(SolverKind, f64, f64)) -> f64| {
        points.iter().map(pick).fold(init, f)
    };
    let (x0, x1, xticks) = axis(
        fold(f64::min, f64::INFINITY, |p| p.1),
        fold(f64::max, f64::NEG_INFINITY, |p| p.1),
    );
    let (y0, y1, yticks) = axis(
        fold(f64::min, f64::INFINITY, |p| p.2),
        fold(f64::max, f64::NEG_INFINITY, |p| p.2),
    );
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        coord(LEFT),
        coord(TOP),
        coord(pw),
        coord(ph)
    );
    for &t in &xticks {
        let x = coord(sx(t));
        let yb = TOP + ph;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            coord(yb),
            coord(yb + 5.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            coord(yb + 19.0),
            label(t)
        );
    }
    for &t in &yticks {
        let y = coord(sy(t));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
            coord(LEFT - 5.0),
            coord(LEFT)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            coord(LEFT - 8.0),
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">alpha</text>"#,
        coord(LEFT + pw / 2.0),
        coord(HEIGHT - 12.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{}</text>"#,
        field.label(),
        cy = coord(TOP + ph / 2.0)
    );

    let mut legend = 0;
    for kind in [SolverKind::Lp, SolverKind::Sdp] {
        let mut series: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.0 == kind)
            .map(|p| (p.1, p.2))
            .collect();
        if series.is_empty() {
            continue;
        }
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        let c = color(kind);
        if series.len() >= 2 {
            let pts: Vec<String> = series
                .iter()
                .map(|&(x, y)| format!("{},{}", coord(sx(x)), coord(sy(y))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        for &(x, y) in &series {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="3" fill="{c}"/>"#,
                coord(sx(x)),
                coord(sy(y))
            );
        }
        let ly = TOP + 12.0 + 18.0 * legend as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="1.5"/>"#,
            coord(lx),
            coord(lx + 20.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" dominant-baseline="middle">{}</text>"#,
            coord(lx + 26.0),
            kind.as_str()
        );
        legend += 1;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_plot(rows: &[SweepRow], field: PlotField, path: &Path) -> Result<()> {
    let text = render_svg(rows, field)?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `out.svg` -> `out-gap.svg`
pub fn gap_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-gap.{}", ext.to_string_lossy()),
        None => format!("{stem}-gap"),
    };
    path.with_file_name(name)
}
