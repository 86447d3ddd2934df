//! Interpolating 2D cubic splines and arc-length resampling.
//!
//! Splines are parameterized by cumulative chord length between the input
//! points. Closed curves use periodic end conditions, open curves use natural
//! ones (zero second derivative at both ends).

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

/// Minimum number of resampled points accepted by [`fit_and_resample`].
pub const MIN_RESAMPLE: usize = 50;

/// Subintervals per spline segment in the arc-length table.
const ARC_SUBDIVISIONS: usize = 16;

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// C2-continuous interpolating cubic spline through 2D points.
#[derive(Debug, Clone)]
pub struct CubicSpline2 {
    /// Knot parameters, one per point plus the closing knot for closed curves.
    knots: Vec<f64>,
    /// Points at the knots (the first point repeated at the end when closed).
    values: Vec<Vec2>,
    /// Second derivatives at the knots.
    second: Vec<Vec2>,
    closed: bool,
    /// Cumulative (parameter, arc length) table for arc-length inversion.
    arc_table: Vec<(f64, f64)>,
}

impl CubicSpline2 {
    pub fn new(points: &[Vec2], closed: bool) -> Result<Self> {
        let min = if closed { 3 } else { 2 };
        if points.len() < min {
            return Err(Error::validation(format!(
                "a {} spline needs at least {min} points, got {}",
                if closed { "closed" } else { "open" },
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("waypoint {i} is not finite")));
        }
        let mut values = points.to_vec();
        if closed {
            values.push(points[0]);
        }
        let mut knots = Vec::with_capacity(values.len());
        knots.push(0.0);
        for i in 1..values.len() {
            let h = values[i].distance(values[i - 1]);
            if h <= 0.0 {
                return Err(Error::validation(format!(
                    "duplicate adjacent waypoints at index {}",
                    (i - 1) % points.len()
                )));
            }
            knots.push(knots[i - 1] + h);
        }

        let xs: Vec<f64> = values.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = values.iter().map(|p| p.y).collect();
        let (mx, my) = if closed {
            (periodic_second(&knots, &xs), periodic_second(&knots, &ys))
        } else {
            (natural_second(&knots, &xs), natural_second(&knots, &ys))
        };
        let second = mx.into_iter().zip(my).map(|(x, y)| Vec2::new(x, y)).collect();

        let mut spline = CubicSpline2 {
            knots,
            values,
            second,
            closed,
            arc_table: Vec::new(),
        };
        spline.build_arc_table();
        Ok(spline)
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Parameter range `[0, param_length]`.
    pub fn param_length(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Total arc length of the curve.
    pub fn arc_length(&self) -> f64 {
        self.arc_table.last().unwrap().1
    }

    fn wrap(&self, t: f64) -> f64 {
        let len = self.param_length();
        if self.closed {
            t.rem_euclid(len)
        } else {
            t.clamp(0.0, len)
        }
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len() - 1;
        match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Position, first and second derivative with respect to the parameter.
    pub fn eval_all(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let t = self.wrap(t);
        let i = self.segment(t);
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (a, b) = (t1 - t, t - t0);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let c0 = y0 * (1.0 / h) - m0 * (h / 6.0);
        let c1 = y1 * (1.0 / h) - m1 * (h / 6.0);
        let p = m0 * (a * a * a / (6.0 * h)) + m1 * (b * b * b / (6.0 * h)) + c0 * a + c1 * b;
        let d1 = m0 * (-a * a / (2.0 * h)) + m1 * (b * b / (2.0 * h)) - c0 + c1;
        let d2 = m0 * (a / h) + m1 * (b / h);
        (p, d1, d2)
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        self.eval_all(t).0
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        self.eval_all(t).1
    }

    /// Signed curvature (x'y'' - y'x'') / (x'^2 + y'^2)^(3/2).
    pub fn curvature(&self, t: f64) -> f64 {
        let (_, d1, d2) = self.eval_all(t);
        let speed = d1.norm();
        d1.cross(d2) / (speed * speed * speed)
    }

    fn speed(&self, t: f64) -> f64 {
        self.derivative(t).norm()
    }

    fn integrate_speed(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * self.speed(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn build_arc_table(&mut self) {
        let mut table = Vec::with_capacity((self.knots.len() - 1) * ARC_SUBDIVISIONS + 1);
        table.push((0.0, 0.0));
        let mut s = 0.0;
        for i in 0..self.knots.len() - 1 {
            let (t0, t1) = (self.knots[i], self.knots[i + 1]);
            for j in 0..ARC_SUBDIVISIONS {
                let a = t0 + (t1 - t0) * j as f64 / ARC_SUBDIVISIONS as f64;
                let b = if j + 1 == ARC_SUBDIVISIONS {
                    t1
                } else {
                    t0 + (t1 - t0) * (j + 1) as f64 / ARC_SUBDIVISIONS as f64
                };
                s += self.integrate_speed(a, b);
                table.push((b, s));
            }
        }
        self.arc_table = table;
    }

    /// Parameter value at arc length `s` from the start.
    pub fn param_at_arc(&self, s: f64) -> f64 {
        let total = self.arc_length();
        let s = s.clamp(0.0, total);
        let j = match self
            .arc_table
            .binary_search_by(|e| e.1.partial_cmp(&s).unwrap())
        {
            Ok(j) => return self.arc_table[j].0,
            Err(j) => j.clamp(1, self.arc_table.len() - 1),
        };
        let (ta, sa) = self.arc_table[j - 1];
        let (tb, sb) = self.arc_table[j];
        let mut t = ta + (tb - ta) * (s - sa) / (sb - sa);
        // Newton refinement inside the bracket.
        for _ in 0..3 {
            let err = sa + self.integrate_speed(ta, t) - s;
            let v = self.speed(t);
            if v <= 0.0 {
                break;
            }
            t = (t - err / v).clamp(ta, tb);
        }
        t
    }
}

fn natural_second(knots: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let interior = n - 2;
    let mut sub = vec![0.0; interior];
    let mut diag = vec![0.0; interior];
    let mut sup = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    for r in 0..interior {
        let i = r + 1;
        let h0 = knots[i] - knots[i - 1];
        let h1 = knots[i + 1] - knots[i];
        sub[r] = h0;
        diag[r] = 2.0 * (h0 + h1);
        sup[r] = h1;
        rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    let sol = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    m[1..n - 1].copy_from_slice(&sol);
    m
}

/// Second derivatives for a periodic spline; `y` has its first value repeated
/// at the end.
fn periodic_second(knots: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len() - 1;
    let h = |i: usize| knots[i + 1] - knots[i];
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let h0 = h(prev);
        let h1 = h(i);
        let y_prev = y[prev];
        let y_next = y[i + 1];
        sub[i] = h0;
        diag[i] = 2.0 * (h0 + h1);
        sup[i] = h1;
        rhs[i] = 6.0 * ((y_next - y[i]) / h1 - (y[i] - y_prev) / h0);
    }
    let mut m = solve_cyclic(&sub, &diag, &sup, &rhs);
    m.push(m[0]);
    m
}

/// Thomas algorithm; `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal solve via Sherman-Morrison. The corner entries are
/// `sub[0]` (row 0, column n-1) and `sup[n-1]` (row n-1, column 0).
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let beta = sub[0];
    let alpha = sup[n - 1];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &bb, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &bb, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// A finely resampled smooth trajectory, ready for the speed solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledPath {
    pub points: Vec<Vec2>,
    /// Heading of the path at each point, radians.
    pub tangent_angles: Vec<f64>,
    /// Signed curvature at each point, 1/m (positive turning left).
    pub curvature: Vec<f64>,
    /// Chord length from each point to the next; for closed paths the last
    /// entry closes the loop back to the first point.
    pub segment_lengths: Vec<f64>,
    pub closed: bool,
}

impl SampledPath {
    /// Builds a path from precomputed samples, checking the invariants.
    pub fn new(
        points: Vec<Vec2>,
        tangent_angles: Vec<f64>,
        curvature: Vec<f64>,
        closed: bool,
    ) -> Result<Self> {
        let k = points.len();
        if k < 2 || tangent_angles.len() != k || curvature.len() != k {
            return Err(Error::validation(
                "path samples must have matching lengths and at least two points",
            ));
        }
        let n_seg = if closed { k } else { k - 1 };
        let segment_lengths: Vec<f64> = (0..n_seg)
            .map(|i| points[i].distance(points[(i + 1) % k]))
            .collect();
        if let Some(i) = segment_lengths.iter().position(|&l| !(l > 0.0)) {
            return Err(Error::validation(format!(
                "zero-length path segment after point {i}"
            )));
        }
        Ok(SampledPath {
            points,
            tangent_angles,
            curvature,
            segment_lengths,
            closed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }

    /// Arc-length coordinate of every speed-solver station. Closed paths get a
    /// final station at the finish line, one loop after the start.
    pub fn station_arc(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.segment_lengths.len() + 1);
        s.push(0.0);
        let mut acc = 0.0;
        for l in &self.segment_lengths {
            acc += l;
            s.push(acc);
        }
        s
    }
}

/// Fits a cubic spline through `waypoints` and resamples `k` points evenly
/// spaced in arc length.
pub fn fit_and_resample(waypoints: &[Vec2], closed: bool, k: usize) -> Result<SampledPath> {
    if k < MIN_RESAMPLE {
        return Err(Error::validation(format!(
            "resample count {k} below the minimum of {MIN_RESAMPLE}"
        )));
    }
    let spline = CubicSpline2::new(waypoints, closed)?;
    resample(&spline, k)
}

/// Resamples an existing spline at `k` points evenly spaced in arc length.
pub fn resample(spline: &CubicSpline2, k: usize) -> Result<SampledPath> {
    let total = spline.arc_length();
    let step = if spline.is_closed() {
        total / k as f64
    } else {
        total / (k - 1) as f64
    };
    let mut points = Vec::with_capacity(k);
    let mut angles = Vec::with_capacity(k);
    let mut curvature = Vec::with_capacity(k);
    for i in 0..k {
        let t = spline.param_at_arc(step * i as f64);
        let (p, d1, d2) = spline.eval_all(t);
        let speed = d1.norm();
        points.push(p);
        angles.push(d1.angle());
        curvature.push(d1.cross(d2) / (speed * speed * speed));
    }
    if let Some(i) = curvature.iter().position(|c| !c.is_finite()) {
        return Err(Error::DegeneratePath { station: i });
    }
    SampledPath::new(points, angles, curvature, spline.is_closed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> Vec<Vec2> {
        (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect()
    }

    #[test]
    fn interpolates_knots() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(3.0, 1.0),
            Vec2::new(4.0, 4.0),
        ];
        for closed in [false, true] {
            let s = CubicSpline2::new(&pts, closed).unwrap();
            for (i, p) in pts.iter().enumerate() {
                let q = s.eval(s.knots()[i]);
                assert!(q.distance(*p) < 1e-12, "closed={closed} i={i}");
            }
        }
    }

    #[test]
    fn periodic_is_c2_across_seam() {
        let s = CubicSpline2::new(&circle(7, 3.0), true).unwrap();
        let len = s.param_length();
        let (p0, d0, dd0) = s.eval_all(1e-9);
        let (p1, d1, dd1) = s.eval_all(len - 1e-9);
        assert!(p0.distance(p1) < 1e-7);
        assert!(d0.distance(d1) < 1e-6);
        assert!(dd0.distance(dd1) < 1e-6);
    }

    #[test]
    fn natural_ends_have_zero_second_derivative() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(3.0, 1.0),
        ];
        let s = CubicSpline2::new(&pts, false).unwrap();
        assert!(s.eval_all(0.0).2.norm() < 1e-12);
        assert!(s.eval_all(s.param_length()).2.norm() < 1e-12);
    }

    #[test]
    fn straight_line_has_zero_curvature() {
        let pts: Vec<Vec2> = (0..4).map(|i| Vec2::new(i as f64 * 2.0, i as f64)).collect();
        let path = fit_and_resample(&pts, false, 100).unwrap();
        let max_k = path.curvature.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        assert!(max_k < 1e-9, "{max_k}");
        assert_eq!(path.segment_lengths.len(), 99);
    }

    #[test]
    fn circle_curvature_matches_reference_spline() {
        // Extremes of the periodic cubic interpolant of this circle, computed
        // independently with scipy.interpolate.CubicSpline on a dense grid.
        let (k_min, k_max) = (0.197_570_971, 0.204_786_451);
        let path = fit_and_resample(&circle(12, 5.0), true, 100).unwrap();
        for k in &path.curvature {
            assert!(*k >= k_min - 1e-6 && *k <= k_max + 1e-6, "{k}");
            assert!((k - 0.2).abs() / 0.2 < 0.025, "{k}");
        }
        assert_eq!(path.segment_lengths.len(), 100);
        let expected = 2.0 * PI * 5.0;
        assert!((path.total_length() - expected).abs() / expected < 0.01);
    }

    #[test]
    fn arc_length_resampling_is_uniform() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 2.0),
            Vec2::new(5.0, 2.5),
            Vec2::new(6.0, -1.0),
        ];
        let path = fit_and_resample(&pts, false, 200).unwrap();
        let mean = path.total_length() / 199.0;
        for l in &path.segment_lengths {
            assert!((l - mean).abs() / mean < 0.01);
        }
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let path = fit_and_resample(&circle(9, 2.0), true, 100).unwrap();
        let k = path.len();
        for i in 0..k {
            let fd = (path.points[(i + 1) % k] - path.points[(i + k - 1) % k]).angle();
            let mut d = (fd - path.tangent_angles[i]).abs();
            d = d.min(2.0 * PI - d);
            assert!(d < 0.1);
        }
    }

    #[test]
    fn rejects_small_k_and_duplicates() {
        let pts = circle(8, 1.0);
        assert!(matches!(
            fit_and_resample(&pts, true, 10),
            Err(Error::Validation(_))
        ));
        let mut dup = pts.clone();
        dup.insert(3, dup[2]);
        assert!(matches!(
            fit_and_resample(&dup, true, 100),
            Err(Error::Validation(_))
        ));
        // closing duplicate counts as adjacent for closed curves
        let mut closing = pts.clone();
        closing.push(pts[0]);
        assert!(fit_and_resample(&closing, true, 100).is_err());
    }
}
