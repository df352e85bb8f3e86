//! Self-contained SVG line charts with shaded +-1 std bands, plus a
//! whitespace-separated data file for gnuplot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::aggregate::{fmt_num, Curve, CurveRow, Stat};
use crate::error::{HarnessError, Result};

pub const DEFAULT_LOG_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Iteration,
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YMetric {
    PgNorm,
    Gamma,
    Curvature,
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxesSpec {
    pub x: XAxis,
    pub y: YMetric,
    pub log_y: bool,
    /// Values at or below zero are drawn at this level on a log axis.
    pub floor: f64,
    pub title: String,
}

impl AxesSpec {
    pub fn new(x: XAxis, y: YMetric, log_y: bool, title: impl Into<String>) -> Self {
        AxesSpec {
            x,
            y,
            log_y,
            floor: DEFAULT_LOG_FLOOR,
            title: title.into(),
        }
    }

    fn x_label(&self) -> &'static str {
        match self.x {
            XAxis::Iteration => "iteration",
            XAxis::Samples => "samples",
        }
    }

    fn y_label(&self) -> &'static str {
        match self.y {
            YMetric::PgNorm => "||g_X||",
            YMetric::Gamma => "gamma",
            YMetric::Curvature => "curvature estimate",
            YMetric::Value => "f",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub svg: PathBuf,
    pub data: PathBuf,
    pub warnings: Vec<String>,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn abscissa(axis: XAxis, r: &CurveRow) -> f64 {
    match axis {
        XAxis::Iteration => r.t as f64,
        XAxis::Samples => r.samples_cum,
    }
}

fn metric(y: YMetric, r: &CurveRow) -> Option<Stat> {
    match y {
        YMetric::PgNorm => r.pg_norm,
        YMetric::Gamma => r.gamma,
        YMetric::Curvature => r.curvature,
        YMetric::Value => r.f,
    }
}

/// A curve's points `(x, mean, std)` in data units.
fn points(axes: &AxesSpec, c: &Curve) -> Vec<(f64, f64, f64)> {
    c.rows
        .iter()
        .filter_map(|r| metric(axes.y, r).map(|s| (abscissa(axes.x, r), s.mean, s.std)))
        .filter(|(x, m, s)| x.is_finite() && m.is_finite() && s.is_finite())
        .collect()
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    floor: f64,
}

impl Scale {
    fn tf(&self, v: f64) -> f64 {
        if self.log {
            v.max(self.floor).log10()
        } else {
            v
        }
    }

    fn unit(&self, v: f64) -> f64 {
        let (lo, hi) = (self.tf(self.lo), self.tf(self.hi));
        if hi > lo {
            (self.tf(v) - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.tf(self.lo).floor() as i32, self.tf(self.hi).ceil() as i32);
            let step = ((b - a) / 8).max(1);
            (a..=b).step_by(step as usize).map(|e| 10f64.powi(e)).filter(|v| *v >= self.lo && *v <= self.hi).collect()
        } else {
            (0..=5).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0).collect()
        }
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<stem>.svg` and `<stem>.dat`.
pub fn emit_plot(curves: &[Curve], axes: &AxesSpec, stem: &Path) -> Result<PlotOutput> {
    if curves.is_empty() {
        return Err(HarnessError::Trial("nothing to plot: no curves".into()));
    }
    if axes.log_y && !(axes.floor > 0.0) {
        return Err(HarnessError::Trial("log axis floor must be positive".into()));
    }
    let mut warnings = Vec::new();
    let series: Vec<Vec<(f64, f64, f64)>> = curves.iter().map(|c| points(axes, c)).collect();
    if axes.log_y {
        for (c, pts) in curves.iter().zip(&series) {
            let clamped = pts.iter().filter(|p| p.1 <= 0.0).count();
            if clamped > 0 {
                let msg = format!(
                    "{}: {clamped} nonpositive value(s) drawn at the log floor {:e}",
                    c.label, axes.floor
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let all = series.iter().flatten();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, s) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        let (a, b) = if axes.log_y { (m.max(axes.floor), (m + s).max(axes.floor)) } else { (m - s, m + s) };
        y_lo = y_lo.min(a);
        y_hi = y_hi.max(b);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, if axes.log_y { 1.0 } else { 0.0 }, 1.0);
    }
    let xs = Scale { lo: x_lo, hi: x_hi, log: false, floor: axes.floor };
    let ys = Scale { lo: y_lo, hi: y_hi, log: axes.log_y, floor: axes.floor };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + pw * xs.unit(x);
    let py = |y: f64| TOP + ph * (1.0 - ys.unit(y));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&axes.title)
    );
    // frame and ticks
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for v in xs.ticks() {
        let x = px(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(v)
        );
    }
    for v in ys.ticks() {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        axes.x_label()
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(axes.y_label()),
        if axes.log_y { " (log)" } else { "" }
    );

    for (i, (c, pts)) in curves.iter().zip(&series).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.is_empty() {
            continue;
        }
        let band = |sign: f64| {
            pts.iter().map(move |&(x, m, s)| {
                let v = m + sign * s;
                (px(x), py(if axes.log_y { v.max(axes.floor) } else { v }))
            })
        };
        if pts.iter().any(|p| p.2 > 0.0) {
            let poly: Vec<String> = band(1.0)
                .chain(band(-1.0).collect::<Vec<_>>().into_iter().rev())
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                poly.join(" ")
            );
        }
        let line: Vec<String> = band(0.0).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");

    let svg_path = stem.with_extension("svg");
    let data_path = stem.with_extension("dat");
    std::fs::write(&svg_path, svg).map_err(|e| HarnessError::io(&svg_path, e))?;
    std::fs::write(&data_path, data_file(curves, axes)).map_err(|e| HarnessError::io(&data_path, e))?;
    Ok(PlotOutput {
        svg: svg_path,
        data: data_path,
        warnings,
    })
}

/// Columns: abscissa, then mean and std per curve; `NaN` where a curve has
/// no value at that abscissa.
fn data_file(curves: &[Curve], axes: &AxesSpec) -> String {
    let mut xs: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.rows.iter().map(|r| abscissa(axes.x, r)))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let lookup: Vec<Vec<(f64, Stat)>> = curves
        .iter()
        .map(|c| {
            c.rows
                .iter()
                .filter_map(|r| metric(axes.y, r).map(|s| (abscissa(axes.x, r), s)))
                .collect()
        })
        .collect();
    let mut out = String::new();
    let _ = write!(out, "# {}", axes.x_label());
    for c in curves {
        let _ = write!(out, " {0}_mean {0}_std", c.label);
    }
    out.push('\n');
    for x in xs {
        out.push_str(&fmt_num(x));
        for col in &lookup {
            match col.iter().find(|(cx, _)| *cx == x) {
                Some((_, s)) => {
                    let _ = write!(out, " {} {}", fmt_num(s.mean), fmt_num(s.std));
                }
                None => out.push_str(" NaN NaN"),
            }
        }
        out.push('\n');
    }
    out
}
