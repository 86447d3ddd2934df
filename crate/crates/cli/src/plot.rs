//! Minimal SVG plots: racing line colored by speed, GG diagram, and
//! convergence curves with bands. Plots only read numbers; nothing here
//! feeds back into the CSV outputs.

use raceline::baseline::{ComparisonReport, Method};
use raceline::speed::SpeedProfile;
use raceline::track::CenterLine;
use raceline::Vec2;
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 560.0;
const MARGIN: f64 = 64.0;

/// Maps data coordinates into the plot area, y pointing up.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), right_margin: f64) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
            (lo - 0.04 * span, hi + 0.04 * span)
        };
        let ((x0, x1), (y0, y1)) = (pad(x), pad(y));
        Frame {
            x0,
            x1,
            y0,
            y1,
            left: MARGIN,
            right: WIDTH - right_margin,
            top: 40.0,
            bottom: HEIGHT - MARGIN,
        }
    }

    /// Widens one range so a data unit has the same length on both axes.
    fn equal_aspect(mut self) -> Self {
        let sx = (self.right - self.left) / (self.x1 - self.x0);
        let sy = (self.bottom - self.top) / (self.y1 - self.y0);
        if sx > sy {
            let half = 0.5 * (self.right - self.left) / sy;
            let mid = 0.5 * (self.x0 + self.x1);
            self.x0 = mid - half;
            self.x1 = mid + half;
        } else {
            let half = 0.5 * (self.bottom - self.top) / sx;
            let mid = 0.5 * (self.y0 + self.y1);
            self.y0 = mid - half;
            self.y1 = mid + half;
        }
        self
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)
    }

    fn point(&self, x: f64, y: f64) -> String {
        format!("{:.2},{:.2}", self.px(x), self.py(y))
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.left,
            self.top,
            self.right - self.left,
            self.bottom - self.top
        );
        for t in ticks(self.x0, self.x1) {
            let x = self.px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                self.bottom + 5.0,
                self.bottom + 20.0,
                label(t),
                b = self.bottom
            );
        }
        for t in ticks(self.y0, self.y1) {
            let y = self.py(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                self.left - 5.0,
                self.left - 8.0,
                y + 4.0,
                label(t),
                l = self.left
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            0.5 * (self.left + self.right),
            HEIGHT - 18.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            0.5 * (self.top + self.bottom),
            escape(y_label)
        );
    }
}

/// Round tick positions covering `[lo, hi]`, about six of them.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    if !(raw.is_finite() && raw > 0.0) {
        return vec![lo];
    }
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    svg
}

fn polyline(svg: &mut String, frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
    let coords: Vec<String> = pts.map(|(x, y)| frame.point(x, y)).collect();
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" {style}/>"#, coords.join(" "));
}

/// Viridis-like ramp, `t` in [0, 1].
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 } * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Track edges, dashed center line and the racing line colored by speed.
pub fn raceline_svg(center: &CenterLine, profile: &SpeedProfile, title: &str) -> String {
    let normals = center.polyline_normals();
    let edge = |sign: f64| -> Vec<Vec2> {
        center
            .points()
            .iter()
            .zip(&normals)
            .zip(center.widths())
            .map(|((&p, &n), &w)| p + n * (sign * 0.5 * w))
            .collect()
    };
    let (left, right) = (edge(1.0), edge(-1.0));
    let all = left.iter().chain(&right).chain(&profile.points);
    let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for p in all {
        xr = (xr.0.min(p.x), xr.1.max(p.x));
        yr = (yr.0.min(p.y), yr.1.max(p.y));
    }
    let frame = Frame::new(xr, yr, 110.0).equal_aspect();
    let mut svg = open(title);
    frame.axes(&mut svg, "x [m]", "y [m]");
    let closed = center.is_closed();
    let ring = |pts: &[Vec2]| {
        let mut v: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
        if closed {
            v.push(v[0]);
        }
        v
    };
    for e in [&left, &right] {
        polyline(&mut svg, &frame, ring(e).into_iter(), r##"stroke="#222" stroke-width="1.5""##);
    }
    polyline(
        &mut svg,
        &frame,
        ring(center.points()).into_iter(),
        r##"stroke="#888" stroke-width="1" stroke-dasharray="5,4""##,
    );
    let (vmin, vmax) = profile
        .speeds
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    for k in 0..profile.points.len().saturating_sub(1) {
        let (a, b) = (profile.points[k], profile.points[k + 1]);
        let v = 0.5 * (profile.speeds[k] + profile.speeds[k + 1]);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="3" stroke-linecap="round"/>"#,
            frame.px(a.x),
            frame.py(a.y),
            frame.px(b.x),
            frame.py(b.y),
            color((v - vmin) / span)
        );
    }
    // Color bar.
    let (bx, by, bh) = (WIDTH - 80.0, frame.top + 20.0, 240.0);
    for i in 0..48 {
        let t = i as f64 / 47.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx:.1}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            by + (1.0 - t) * bh - bh / 48.0,
            bh / 48.0 + 0.5,
            color(t)
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 20.0, by + 4.0, label(vmax));
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 20.0, by + bh, label(vmin));
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">speed [m/s]</text>"#, bx - 10.0, by - 8.0);
    svg.push_str("</svg>\n");
    svg
}

/// Lateral against longitudinal acceleration with the friction circle.
pub fn gg_svg(points: &[(f64, f64)], friction_accel: f64, title: &str) -> String {
    let r = friction_accel;
    let frame = Frame::new((-1.1 * r, 1.1 * r), (-1.1 * r, 1.1 * r), MARGIN).equal_aspect();
    let mut svg = open(title);
    frame.axes(&mut svg, "lateral acceleration [m/s^2]", "longitudinal acceleration [m/s^2]");
    let circle = (0..=180).map(|i| {
        let a = std::f64::consts::TAU * i as f64 / 180.0;
        (r * a.cos(), r * a.sin())
    });
    polyline(&mut svg, &frame, circle, r##"stroke="#c33" stroke-width="1.5""##);
    for &(lat, long) in points {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#2a6fb0" fill-opacity="0.7"/>"##,
            frame.px(lat),
            frame.py(long)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn method_color(m: Method) -> &'static str {
    match m {
        Method::Random => "#7f7f7f",
        Method::Ei => "#1f77b4",
        Method::Nei => "#d62728",
    }
}

/// Mean best-so-far lap time per method with its 95% band.
pub fn comparison_svg(report: &ComparisonReport, title: &str) -> String {
    let values = report
        .methods
        .iter()
        .flat_map(|m| m.lower.iter().chain(&m.upper))
        .filter(|v| v.is_finite());
    let yr = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let yr = if yr.0.is_finite() { yr } else { (0.0, 1.0) };
    let frame = Frame::new((1.0, report.evaluations.max(2) as f64), yr, MARGIN);
    let mut svg = open(title);
    frame.axes(&mut svg, "evaluations", "best lap time [s]");
    for (i, m) in report.methods.iter().enumerate() {
        if m.mean.is_empty() || !m.mean.iter().all(|v| v.is_finite()) {
            continue;
        }
        let c = method_color(m.method);
        let upper = m.upper.iter().enumerate().map(|(k, v)| frame.point((k + 1) as f64, *v));
        let lower = m.lower.iter().enumerate().rev().map(|(k, v)| frame.point((k + 1) as f64, *v));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{c}" fill-opacity="0.18" stroke="none"/>"#,
            band.join(" ")
        );
        polyline(
            &mut svg,
            &frame,
            m.mean.iter().enumerate().map(|(k, v)| ((k + 1) as f64, *v)),
            &format!(r#"stroke="{c}" stroke-width="2""#),
        );
        let y = frame.top + 18.0 + 18.0 * i as f64;
        let x = frame.right - 170.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{c}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{} (n = {})</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            m.method.label(),
            m.n_runs
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(0.13, 4.9);
        assert_eq!(t, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ticks(-12.0, 12.0), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn labels_drop_trailing_zeros() {
        assert_eq!(label(2.5), "2.5");
        assert_eq!(label(3.0), "3");
        assert_eq!(label(-0.0), "0");
    }

    #[test]
    fn color_ramp_ends() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn gg_plot_has_one_marker_per_point() {
        let svg = gg_svg(&[(1.0, 0.0), (0.0, -2.0), (3.0, 4.0)], 9.81, "gg");
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
