//! Dependency-free SVG line charts for run logs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::output::CsvLog;
use super::run::RunLog;
use crate::control::{reference_at, Reference};
use crate::error::{Error, Result};

/// Per-run columns needed by the figures.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub dx_true: Vec<f64>,
    pub dy_true: Vec<f64>,
    pub dx_hat: Vec<f64>,
    pub dy_hat: Vec<f64>,
    /// One column per obstacle.
    pub h: Vec<Vec<f64>>,
}

impl PlotSeries {
    pub fn from_log(label: &str, log: &RunLog) -> Self {
        let rows: Vec<_> = log.rows.iter().step_by(log.decimation.max(1)).collect();
        let col = |f: &dyn Fn(&super::run::LogRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let n_obs = rows.first().map_or(0, |r| r.h.len());
        Self {
            label: label.to_string(),
            t: col(&|r| r.t),
            x: col(&|r| r.z[0]),
            y: col(&|r| r.z[1]),
            ax: col(&|r| r.u[0]),
            ay: col(&|r| r.u[1]),
            dx_true: col(&|r| r.d_true[2]),
            dy_true: col(&|r| r.d_true[3]),
            dx_hat: col(&|r| r.d_hat[2]),
            dy_hat: col(&|r| r.d_hat[3]),
            h: (0..n_obs).map(|i| col(&|r| r.h[i])).collect(),
        }
    }

    pub fn from_csv(label: &str, log: &CsvLog) -> Result<Self> {
        let get = |name: &str| {
            log.column(name)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::Config(format!("CSV log lacks column `{name}`")))
        };
        let mut h = Vec::new();
        for i in 1.. {
            match log.column(&format!("h{i}")) {
                Some(c) if c.iter().any(|v| v.is_finite()) => h.push(c.to_vec()),
                Some(_) => {}
                None => break,
            }
        }
        Ok(Self {
            label: label.to_string(),
            t: get("t")?,
            x: get("x")?,
            y: get("y")?,
            ax: get("ax")?,
            ay: get("ay")?,
            dx_true: get("dx_true")?,
            dy_true: get("dy_true")?,
            dx_hat: get("dx_hat")?,
            dy_hat: get("dy_hat")?,
            h,
        })
    }
}

/// Static scene elements drawn behind the XY paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotScene {
    pub obstacles: Vec<([f64; 2], f64)>,
    pub reference: Option<Reference>,
    pub horizon: f64,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 75.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 4000;

#[derive(Debug, Clone)]
struct Line {
    label: String,
    points: Vec<(f64, f64)>,
    color: &'static str,
    dashed: bool,
}

#[derive(Debug, Clone, Default)]
struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    lines: Vec<Line>,
    circles: Vec<(f64, f64, f64)>,
    zero_line: bool,
    equal_aspect: bool,
}

/// Data range padded by 5% of its span on each side (±1 when degenerate).
pub fn axis_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    if span <= f64::EPSILON * lo.abs().max(1.0) {
        return (lo - 1.0, hi + 1.0);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let step = points.len().div_ceil(MAX_POINTS);
    let last = *points.last().expect("nonempty");
    let mut out: Vec<_> = points.into_iter().step_by(step).collect();
    out.push(last);
    out
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Panel {
    fn ranges(&self, w: f64, h: f64) -> ((f64, f64), (f64, f64)) {
        let xs = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter().map(|p| p.0))
            .chain(self.circles.iter().flat_map(|c| [c.0 - c.2, c.0 + c.2]));
        let ys = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter().map(|p| p.1))
            .chain(self.circles.iter().flat_map(|c| [c.1 - c.2, c.1 + c.2]))
            .chain(self.zero_line.then_some(0.0));
        let (mut xr, mut yr) = (axis_range(xs), axis_range(ys));
        if self.equal_aspect {
            let sx = (xr.1 - xr.0) / w;
            let sy = (yr.1 - yr.0) / h;
            if sx > sy {
                let c = 0.5 * (yr.0 + yr.1);
                let half = 0.5 * sx * h;
                yr = (c - half, c + half);
            } else {
                let c = 0.5 * (xr.0 + xr.1);
                let half = 0.5 * sy * w;
                xr = (c - half, c + half);
            }
        }
        (xr, yr)
    }

    fn render(&self, out: &mut String, top: f64) {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let (x0, y0) = (MARGIN_LEFT, top + MARGIN_TOP);
        let ((xl, xh), (yl, yh)) = self.ranges(w, h);
        let sx = |v: f64| x0 + (v - xl) / (xh - xl) * w;
        let sy = |v: f64| y0 + h - (v - yl) / (yh - yl) * h;

        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="16" text-anchor="middle">{}</text>"##,
            x0 + w / 2.0,
            top + 24.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#333"/>"##
        );
        for i in 0..=5 {
            let fx = xl + (xh - xl) * i as f64 / 5.0;
            let fy = yl + (yh - yl) * i as f64 / 5.0;
            let (px, py) = (sx(fx), sy(fy));
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
                y0,
                y0 + h,
                y0 + h + 16.0,
                tick_label(fx)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
                x0 + w,
                x0 - 6.0,
                py + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"##,
            x0 + w / 2.0,
            y0 + h + 38.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"##,
            x0 - 52.0,
            y0 + h / 2.0,
            x0 - 52.0,
            y0 + h / 2.0,
            escape(&self.y_label)
        );
        if self.zero_line && yl < 0.0 && yh > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#000" stroke-width="1.2" stroke-dasharray="2,3"/>"##,
                sy(0.0),
                x0 + w,
                sy(0.0)
            );
        }
        let px_per_unit = w / (xh - xl);
        for &(cx, cy, r) in &self.circles {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#999" fill-opacity="0.35" stroke="#555"/>"##,
                sx(cx),
                sy(cy),
                r * px_per_unit
            );
        }
        let _ = writeln!(
            out,
            r##"<clipPath id="clip{top:.0}"><rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}"/></clipPath>"##
        );
        for line in &self.lines {
            let mut pts = String::new();
            for &(a, b) in &line.points {
                if a.is_finite() && b.is_finite() {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(a), sy(b));
                }
            }
            let dash = if line.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                out,
                r##"<polyline clip-path="url(#clip{top:.0})" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"##,
                line.color,
                pts.trim_end()
            );
        }
        for (i, line) in self.lines.iter().enumerate() {
            let ly = y0 + 10.0 + 18.0 * i as f64;
            let lx = x0 + w + 12.0;
            let dash = if line.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                out,
                r##"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"##,
                lx + 24.0,
                line.color,
                lx + 30.0,
                ly + 4.0,
                escape(&line.label)
            );
        }
    }
}

fn document(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn zip(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    thin(a.iter().copied().zip(b.iter().copied()).collect())
}

fn xy_panel(series: &[PlotSeries], scene: &PlotScene) -> Panel {
    let mut lines = Vec::new();
    if let Some(r) = &scene.reference {
        let n = 2000;
        let pts = (0..=n)
            .filter_map(|k| reference_at(r, scene.horizon * k as f64 / n as f64).ok())
            .map(|p| (p.pos[0], p.pos[1]))
            .collect();
        lines.push(Line {
            label: "reference".into(),
            points: pts,
            color: "#000000",
            dashed: true,
        });
    }
    for (i, s) in series.iter().enumerate() {
        lines.push(Line {
            label: s.label.clone(),
            points: zip(&s.x, &s.y),
            color: PALETTE[i % PALETTE.len()],
            dashed: false,
        });
    }
    Panel {
        title: "XY paths".into(),
        x_label: "x [m]".into(),
        y_label: "y [m]".into(),
        lines,
        circles: scene.obstacles.iter().map(|(c, r)| (c[0], c[1], *r)).collect(),
        zero_line: false,
        equal_aspect: true,
    }
}

fn time_panel(title: &str, y_label: &str, series: &[PlotSeries], pick: impl Fn(&PlotSeries) -> Vec<(String, Vec<f64>, bool)>, zero_line: bool) -> Panel {
    let mut lines = Vec::new();
    for (i, s) in series.iter().enumerate() {
        for (label, col, dashed) in pick(s) {
            lines.push(Line {
                label,
                points: zip(&s.t, &col),
                color: PALETTE[i % PALETTE.len()],
                dashed,
            });
        }
    }
    Panel {
        title: title.into(),
        x_label: "t [s]".into(),
        y_label: y_label.into(),
        lines,
        circles: Vec::new(),
        zero_line,
        equal_aspect: false,
    }
}

/// Writes `xy_paths.svg`, `barrier.svg`, `disturbance.svg`, and `inputs.svg`.
pub fn emit_plots(series: &[PlotSeries], scene: &PlotScene, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        return Err(Error::EmptyLog);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let n_obs = series.iter().map(|s| s.h.len()).max().unwrap_or(0);
    let barrier: Vec<Panel> = (0..n_obs)
        .map(|i| {
            time_panel(
                &format!("Barrier h{} (obstacle {})", i + 1, i + 1),
                &format!("h{}", i + 1),
                series,
                |s| s.h.get(i).map(|c| vec![(s.label.clone(), c.clone(), false)]).unwrap_or_default(),
                true,
            )
        })
        .collect();
    let disturbance = vec![
        time_panel(
            "Disturbance, x component (solid true, dashed estimate)",
            "d_x [m/s^2]",
            series,
            |s| {
                vec![
                    (format!("{} true", s.label), s.dx_true.clone(), false),
                    (format!("{} est.", s.label), s.dx_hat.clone(), true),
                ]
            },
            false,
        ),
        time_panel(
            "Disturbance, y component (solid true, dashed estimate)",
            "d_y [m/s^2]",
            series,
            |s| {
                vec![
                    (format!("{} true", s.label), s.dy_true.clone(), false),
                    (format!("{} est.", s.label), s.dy_hat.clone(), true),
                ]
            },
            false,
        ),
    ];
    let inputs = vec![
        time_panel("Input a_x", "a_x [m/s^2]", series, |s| vec![(s.label.clone(), s.ax.clone(), false)], false),
        time_panel("Input a_y", "a_y [m/s^2]", series, |s| vec![(s.label.clone(), s.ay.clone(), false)], false),
    ];
    let files = [
        ("xy_paths.svg", vec![xy_panel(series, scene)]),
        ("barrier.svg", barrier),
        ("disturbance.svg", disturbance),
        ("inputs.svg", inputs),
    ];
    let mut written = Vec::new();
    for (name, panels) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, document(&panels)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
