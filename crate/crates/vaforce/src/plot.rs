//! Static SVG line charts. Output depends only on the input numbers, so
//! identical data always renders to identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::csvio::{fmt_f64, write_table};

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Line {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        Self {
            name: name.into(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    pub log_x: bool,
    pub log_y: bool,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 4000;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn tick_label(&self, f: f64) -> String {
        let v = self.lo + f * (self.hi - self.lo);
        if self.log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3e}")
        }
    }
}

/// Renders the plot as an SVG document.
pub fn render_svg(plot: &Plot) -> String {
    let xa = Axis::fit(plot.lines.iter().flat_map(|l| l.x.iter().copied()), plot.log_x);
    let ya = Axis::fit(plot.lines.iter().flat_map(|l| l.y.iter().copied()), plot.log_y);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let x = LEFT + f * pw;
        let y = TOP + ph - f * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 18.0,
            xa.tick_label(f)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            ya.tick_label(f)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    for (i, line) in plot.lines.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = line.x.len().div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        for k in (0..line.x.len()).step_by(stride) {
            if let (Some(fx), Some(fy)) = (xa.frac(line.x[k]), ya.frac(line.y[k])) {
                let _ = write!(pts, "{:.2},{:.2} ", LEFT + fx * pw, TOP + ph - fy * ph);
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text class="legend" x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Long-format rows `series, x, y` behind a plot.
pub fn plot_rows(plot: &Plot) -> Vec<Vec<String>> {
    plot.lines
        .iter()
        .flat_map(|l| {
            l.x.iter()
                .zip(&l.y)
                .map(|(x, y)| vec![l.name.clone(), fmt_f64(*x), fmt_f64(*y)])
        })
        .collect()
}

/// Writes `<stem>.svg` and `<stem>.csv` for every plot and returns the
/// paths in emission order.
pub fn emit_plots(plots: &[(String, Plot)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if plots.is_empty() || plots.iter().any(|(_, p)| p.lines.is_empty()) {
        bail!("nothing to plot: every plot needs at least one series");
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut files = Vec::new();
    for (stem, plot) in plots {
        let svg = out_dir.join(format!("{stem}.svg"));
        fs::write(&svg, render_svg(plot)).with_context(|| format!("writing {}", svg.display()))?;
        let csv = out_dir.join(format!("{stem}.csv"));
        write_table(&csv, &["series", "x", "y"], &plot_rows(plot))?;
        files.push(svg);
        files.push(csv);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Plot {
        Plot {
            title: "forces <f1x>".into(),
            x_label: "t [s]".into(),
            y_label: "N".into(),
            lines: vec![
                Line::new("f1x identified", vec![0.0, 0.5, 1.0], vec![0.0, 1.0, -1.0]),
                Line::new("f1x reference", vec![0.0, 0.5, 1.0], vec![0.0, 0.9, -1.1]),
            ],
            ..Default::default()
        }
    }

    #[test]
    fn rendering_is_deterministic_and_escaped() {
        let a = render_svg(&sample());
        assert_eq!(a, render_svg(&sample()));
        assert!(a.contains("forces &lt;f1x&gt;"));
        assert_eq!(a.matches("<polyline").count(), 2);
    }

    #[test]
    fn legend_lists_series_names() {
        let svg = render_svg(&sample());
        let legend: Vec<&str> = svg
            .lines()
            .filter_map(|l| l.split(r#"class="legend""#).nth(1))
            .filter_map(|l| l.split('>').nth(1))
            .map(|l| l.trim_end_matches("</text"))
            .collect();
        assert_eq!(legend, ["f1x identified", "f1x reference"]);
    }

    #[test]
    fn log_axes_skip_nonpositive_points() {
        let plot = Plot {
            lines: vec![Line::new("e", vec![0.0, 0.01, 0.05], vec![1e-9, 1e-3, 0.02])],
            log_y: true,
            log_x: true,
            ..Default::default()
        };
        let svg = render_svg(&plot);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }

    #[test]
    fn emit_writes_svg_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let one = Plot {
            lines: vec![Line::new("a", vec![0.0, 1.0], vec![2.0, 3.0])],
            ..Default::default()
        };
        let files = emit_plots(&[("p".into(), one)], dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
        assert_eq!(csv, "series,x,y\na,0,2\na,1,3\n");
        assert!(emit_plots(&[], dir.path()).is_err());
        assert!(emit_plots(&[("q".into(), Plot::default())], dir.path()).is_err());
    }
}
