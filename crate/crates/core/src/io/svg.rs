//! Deterministic SVG plots of interval tubes.
//!
//! One panel per coordinate, time on the horizontal axis. Tubes are drawn
//! as filled bands and sampled realisations as thin grey curves.
//!
//! Vertical range: the narrowest band (by largest width) and the truth
//! curves set the range, padded by a quarter of its span on each side.
//! When a panel holds a single band and no truth, that band only counts
//! until its width first exceeds `GROWTH_CAP` times its initial width
//! (floored at 1% of `1 + |initial midpoint|`). Anything outside the range
//! is clamped to the panel edge and the panel gets a red "clipped" marker.

use std::fmt::Write as _;
use std::path::Path;

use super::{write_bytes, IoError};

pub const GROWTH_CAP: f64 = 100.0;
/// At most this many truth curves are drawn per panel.
pub const MAX_TRUTH_CURVES: usize = 20;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 220.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 30.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];
const CLIP_COLOR: &str = "#d62728";

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub bands: Vec<Band>,
    /// Each curve is a list of `(t, value)` points.
    pub truth: Vec<Vec<(f64, f64)>>,
}

fn hull(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

fn merge(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Option<(f64, f64)> {
    match (a, b) {
        (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
        (x, None) => x,
        (None, y) => y,
    }
}

fn max_width(b: &Band) -> f64 {
    b.lower
        .iter()
        .zip(&b.upper)
        .map(|(l, u)| u - l)
        .fold(0.0, |m, w| {
            if w.is_finite() {
                m.max(w)
            } else {
                f64::INFINITY
            }
        })
}

/// Samples of a lone band that count towards the range.
fn anchored_prefix(b: &Band) -> usize {
    let (Some(&l0), Some(&u0)) = (b.lower.first(), b.upper.first()) else {
        return 0;
    };
    let floor = 0.01 * (1.0 + (0.5 * (l0 + u0)).abs());
    let cap = GROWTH_CAP * (u0 - l0).max(floor);
    b.lower
        .iter()
        .zip(&b.upper)
        .position(|(l, u)| !(u - l <= cap))
        .unwrap_or(b.lower.len())
        .max(1)
}

fn value_range(panel: &Panel) -> (f64, f64) {
    let truth = hull(panel.truth.iter().flatten().map(|p| p.1));
    let anchor = if panel.bands.len() == 1 && truth.is_none() {
        let b = &panel.bands[0];
        let k = anchored_prefix(b);
        hull(b.lower[..k].iter().chain(&b.upper[..k]).copied())
    } else {
        let narrowest = panel
            .bands
            .iter()
            .min_by(|a, b| max_width(a).total_cmp(&max_width(b)));
        narrowest.and_then(|b| hull(b.lower.iter().chain(&b.upper).copied()))
    };
    let (lo, hi) = merge(anchor, truth).unwrap_or((-1.0, 1.0));
    let span = (hi - lo).max(1e-9 * (1.0 + lo.abs().max(hi.abs())));
    (lo - 0.25 * span, hi + 0.25 * span)
}

struct Frame {
    t0: f64,
    t1: f64,
    lo: f64,
    hi: f64,
    top: f64,
}

impl Frame {
    fn inner_width() -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn inner_height() -> f64 {
        PANEL_HEIGHT - TOP - BOTTOM
    }

    fn x(&self, t: f64) -> f64 {
        if self.t1 > self.t0 {
            LEFT + (t - self.t0) / (self.t1 - self.t0) * Self::inner_width()
        } else {
            LEFT + 0.5 * Self::inner_width()
        }
    }

    /// Screen coordinate and whether the value had to be clamped.
    fn y(&self, v: f64) -> (f64, bool) {
        let clipped = !(v >= self.lo && v <= self.hi);
        let c = if v.is_nan() {
            self.hi
        } else {
            v.clamp(self.lo, self.hi)
        };
        let frac = (c - self.lo) / (self.hi - self.lo);
        (
            self.top + TOP + (1.0 - frac) * Self::inner_height(),
            clipped,
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn draw_panel(out: &mut String, panel: &Panel, index: usize, t0: f64, t1: f64) {
    let (lo, hi) = value_range(panel);
    let f = Frame {
        t0,
        t1,
        lo,
        hi,
        top: index as f64 * PANEL_HEIGHT,
    };
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (ytop, ybot) = (f.top + TOP, f.top + PANEL_HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.3}" y="{ytop:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="#444"/>"##,
        x1 - x0,
        ybot - ytop
    );
    let _ = writeln!(
        out,
        r#"<text x="{x0:.3}" y="{:.3}" font-size="13">{}</text>"#,
        ytop - 8.0,
        escape(&panel.title)
    );
    for (v, y) in [(hi, ytop), (lo, ybot)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="end">{v:.3}</text>"#,
            x0 - 4.0,
            y + 3.0
        );
    }
    for (t, anchor) in [(t0, "start"), (t1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="{anchor}">t = {t:.3}</text>"#,
            f.x(t),
            ybot + 14.0
        );
    }

    let mut clipped = false;
    for (k, band) in panel.bands.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let n = band.times.len().min(band.lower.len()).min(band.upper.len());
        if n == 0 {
            continue;
        }
        if n == 1 {
            let x = f.x(band.times[0]);
            let (ya, ca) = f.y(band.upper[0]);
            let (yb, cb) = f.y(band.lower[0]);
            clipped |= ca || cb;
            let _ = writeln!(
                out,
                r#"<line x1="{x:.3}" y1="{ya:.3}" x2="{x:.3}" y2="{yb:.3}" stroke="{color}" stroke-width="2"/>"#
            );
        } else {
            let mut pts = String::new();
            let forward = (0..n).map(|i| (band.times[i], band.upper[i]));
            let backward = (0..n).rev().map(|i| (band.times[i], band.lower[i]));
            for (t, v) in forward.chain(backward) {
                let (y, c) = f.y(v);
                clipped |= c;
                let _ = write!(pts, "{:.3},{y:.3} ", f.x(t));
            }
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.3" stroke="{color}" stroke-width="1"/>"#,
                pts.trim_end()
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            x1 - 70.0 - 90.0 * k as f64,
            ytop - 8.0,
            escape(&band.label)
        );
    }

    for curve in panel.truth.iter().take(MAX_TRUTH_CURVES) {
        let mut pts = String::new();
        for &(t, v) in curve {
            let (y, c) = f.y(v);
            clipped |= c;
            let _ = write!(pts, "{:.3},{y:.3} ", f.x(t));
        }
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#777" stroke-width="0.6"/>"##,
            pts.trim_end()
        );
    }

    if clipped {
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="11" fill="{CLIP_COLOR}" text-anchor="end">clipped</text>"#,
            x1,
            ytop - 8.0
        );
        for y in [ytop, ybot] {
            let _ = writeln!(
                out,
                r#"<line x1="{x0:.3}" y1="{y:.3}" x2="{x1:.3}" y2="{y:.3}" stroke="{CLIP_COLOR}" stroke-dasharray="4 3"/>"#
            );
        }
    }
}

/// Renders all panels stacked vertically.
pub fn render_svg(panels: &[Panel]) -> String {
    let times = hull(panels.iter().flat_map(|p| {
        p.bands
            .iter()
            .flat_map(|b| b.times.iter().copied())
            .chain(p.truth.iter().flatten().map(|q| q.0))
    }));
    let (t0, t1) = times.unwrap_or((0.0, 1.0));
    let height = PANEL_HEIGHT * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH:.3} {height:.3}" width="{WIDTH:.3}" height="{height:.3}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH:.3}" height="{height:.3}" fill="white"/>"#
    );
    for (k, panel) in panels.iter().enumerate() {
        draw_panel(&mut out, panel, k, t0, t1);
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(panels: &[Panel], path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), render_svg(panels).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(label: &str, times: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Band {
        Band {
            label: label.into(),
            times,
            lower,
            upper,
        }
    }

    fn exp_band(label: &str, rate: f64) -> Band {
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let half: Vec<f64> = times.iter().map(|t| 0.05 * (rate * t).exp()).collect();
        band(
            label,
            times.clone(),
            half.iter().map(|h| 1.05 - h).collect(),
            half.iter().map(|h| 1.05 + h).collect(),
        )
    }

    fn well_formed(svg: &str) {
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches('<').count(), svg.matches('>').count());
    }

    #[test]
    fn output_is_deterministic() {
        let panels = vec![Panel {
            title: "x".into(),
            bands: vec![exp_band("naive", 1.2), exp_band("stable", -1.0)],
            truth: vec![vec![(0.0, 1.05), (5.0, 0.0)]],
        }];
        let a = render_svg(&panels);
        assert_eq!(a, render_svg(&panels.clone()));
        well_formed(&a);
    }

    #[test]
    fn single_time_point_is_a_segment() {
        let svg = render_svg(&[Panel {
            title: "x".into(),
            bands: vec![band("stable", vec![0.0], vec![1.0], vec![1.1])],
            truth: vec![],
        }]);
        well_formed(&svg);
        assert!(svg.contains("<line x1=\"430.000\""));
        assert!(!svg.contains("<polygon"));
        assert!(!svg.contains("clipped"));
    }

    #[test]
    fn diverging_band_is_clipped_and_marked() {
        let lone = render_svg(&[Panel {
            title: "x".into(),
            bands: vec![exp_band("naive", 2.0)],
            truth: vec![],
        }]);
        assert!(lone.contains(">clipped</text>"));
        let pair = render_svg(&[Panel {
            title: "x".into(),
            bands: vec![exp_band("naive", 2.0), exp_band("stable", -0.5)],
            truth: vec![],
        }]);
        assert!(pair.contains(">clipped</text>"));
        let tame = render_svg(&[Panel {
            title: "x".into(),
            bands: vec![exp_band("stable", -0.5)],
            truth: vec![],
        }]);
        assert!(!tame.contains("clipped"));
    }

    #[test]
    fn truth_curves_are_capped() {
        let truth: Vec<_> = (0..50)
            .map(|k| vec![(0.0, 1.0), (1.0, k as f64 * 1e-3)])
            .collect();
        let svg = render_svg(&[Panel {
            title: "x".into(),
            bands: vec![],
            truth,
        }]);
        assert_eq!(svg.matches("<polyline").count(), MAX_TRUTH_CURVES);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render_svg(&[Panel {
            title: "a<b & \"c\"".into(),
            ..Panel::default()
        }]);
        assert!(svg.contains("a&lt;b &amp; &quot;c&quot;"));
        well_formed(&svg);
    }
}
