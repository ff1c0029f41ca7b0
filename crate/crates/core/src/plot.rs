//! Standalone SVG line plots for RMSE curves and pseudospectra.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::Pseudospectrum;
use crate::experiments::SweepResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YScale {
    Linear,
    Log10,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub y_scale: YScale,
    pub series: Vec<Series>,
}

/// Maps data values into pixel coordinates.
struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log: bool,
}

impl Axes {
    fn y_value(&self, y: f64) -> f64 {
        if self.log {
            y.log10()
        } else {
            y
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let v = self.y_value(y);
        HEIGHT
            - MARGIN_BOTTOM
            - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Roughly `target` evenly spaced ticks at 1, 2 or 5 times a power of ten.
fn linear_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn format_tick(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Renders `spec` as an SVG document.
pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    let log = spec.y_scale == YScale::Log10;
    let usable = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log || y > 0.0);
    let all: Vec<(f64, f64)> = spec
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(usable)
        .collect();
    if all.is_empty() {
        return Err(Error::Empty("plot series"));
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&(f64, f64)) -> f64| {
        all.iter().map(get).fold(init, f)
    };
    let (x0, x1) = padded(
        fold(f64::min, f64::INFINITY, |p| p.0),
        fold(f64::max, f64::NEG_INFINITY, |p| p.0),
    );
    let ys = |p: &(f64, f64)| p.1;
    let (mut y0, mut y1) = (
        fold(f64::min, f64::INFINITY, ys),
        fold(f64::max, f64::NEG_INFINITY, ys),
    );
    if log {
        y0 = y0.log10().floor();
        y1 = y1.log10().ceil();
    }
    let (y0, y1) = padded(y0, y1);
    let axes = Axes {
        x0,
        x1,
        y0,
        y1,
        log,
    };

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);

    for x in linear_ticks(x0, x1, 8) {
        let px = axes.px(x);
        let _ = writeln!(
            w,
            r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{bottom}" stroke="#e0e0e0"/>"##
        );
        let _ = writeln!(
            w,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 16.0,
            format_tick(x)
        );
    }
    let y_ticks: Vec<(f64, String)> = if log {
        (y0 as i64..=y1 as i64)
            .map(|k| (10f64.powi(k as i32), format!("1e{k}")))
            .collect()
    } else {
        linear_ticks(y0, y1, 6)
            .into_iter()
            .map(|v| (v, format_tick(v)))
            .collect()
    };
    for (y, label) in y_ticks {
        let py = axes.py(y);
        let _ = writeln!(
            w,
            r##"<line x1="{left}" y1="{py:.2}" x2="{right}" y2="{py:.2}" stroke="#e0e0e0"/>"##
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            left - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(&spec.y_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        escape(&spec.title)
    );

    for (i, s) in spec.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| usable(p))
            .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            right - 150.0,
            right - 130.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            right - 125.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_plot(spec: &PlotSpec, path: &Path) -> Result<()> {
    let svg = render_svg(spec)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// RMSE curves on a log axis, one series per labelled sweep.
pub fn rmse_plot(title: &str, x_label: &str, sweeps: &[(&str, &SweepResult)]) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "RMSE (deg)".into(),
        y_scale: YScale::Log10,
        series: sweeps
            .iter()
            .map(|(label, r)| Series {
                label: (*label).into(),
                points: r.points.iter().map(|p| (p.param, p.rmse_deg)).collect(),
            })
            .collect(),
    }
}

/// Normalized pseudospectra in dB against azimuth.
pub fn pseudospectrum_plot(title: &str, spectra: &[(&str, &Pseudospectrum)]) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x_label: "Azimuth (deg)".into(),
        y_label: "Normalized pseudospectrum (dB)".into(),
        y_scale: YScale::Linear,
        series: spectra
            .iter()
            .map(|(label, ps)| Series {
                label: (*label).into(),
                points: ps.grid.iter().copied().zip(ps.normalized_db()).collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::SweepPoint;

    fn sweep(scale: f64) -> SweepResult {
        SweepResult {
            fingerprint: "ab".into(),
            seed: 0,
            points: (0..5)
                .map(|i| SweepPoint {
                    param: -20.0 + 5.0 * i as f64,
                    rmse_deg: scale * 10f64.powi(-i),
                    trials: 10,
                    fill_count: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn rmse_plot_has_labels_and_legend() {
        let (ula, mra) = (sweep(1.0), sweep(0.5));
        let spec = rmse_plot("RMSE vs SNR", "SNR (dB)", &[("ULA", &ula), ("MRA", &mra)]);
        assert_eq!(spec.y_scale, YScale::Log10);
        let svg = render_svg(&spec).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(">SNR (dB)<"));
        assert!(svg.contains(">RMSE (deg)<"));
        assert!(svg.contains(">ULA<") && svg.contains(">MRA<"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">1e-4<"));
    }

    #[test]
    fn pseudospectrum_plot_in_db() {
        let ps = Pseudospectrum {
            grid: vec![-1.0, 0.0, 1.0],
            step: 1.0,
            values: vec![1.0, 10.0, 1.0],
        };
        let spec = pseudospectrum_plot("MUSIC", &[("MRA-8", &ps)]);
        assert_eq!(spec.y_scale, YScale::Linear);
        assert_eq!(
            spec.series[0].points,
            vec![(-1.0, -10.0), (0.0, 0.0), (1.0, -10.0)]
        );
        let svg = render_svg(&spec).unwrap();
        assert!(svg.contains(">Azimuth (deg)<"));
        assert!(svg.contains("(dB)<"));
    }

    #[test]
    fn empty_input_rejected() {
        let spec = PlotSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            y_scale: YScale::Linear,
            series: vec![],
        };
        assert!(matches!(render_svg(&spec), Err(Error::Empty(_))));
        let zeros = Series {
            label: "z".into(),
            points: vec![(0.0, 0.0)],
        };
        let log = PlotSpec {
            y_scale: YScale::Log10,
            series: vec![zeros],
            ..spec
        };
        assert!(render_svg(&log).is_err());
    }

    #[test]
    fn labels_are_escaped() {
        let spec = PlotSpec {
            title: "a<b & c".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            y_scale: YScale::Linear,
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0)],
            }],
        };
        assert!(render_svg(&spec).unwrap().contains("a&lt;b &amp; c"));
    }
}
