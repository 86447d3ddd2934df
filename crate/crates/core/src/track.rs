//! Track center line, optimization nodes and the lateral-offset
//! parameterization of candidate trajectories.

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, Vec2};
use crate::spline::{fit_and_resample, CubicSpline2, SampledPath};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Minimum and maximum number of optimization nodes.
pub const MIN_NODES: usize = 4;
pub const MAX_NODES: usize = 30;

/// Corner weighting of the node density, see [`select_nodes`].
pub const DEFAULT_CORNER_WEIGHT: f64 = 0.05;

/// Ordered center-line waypoints with per-point track width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterLine {
    points: Vec<Vec2>,
    widths: Vec<f64>,
    cumulative_arc_length: Vec<f64>,
    total_length: f64,
    closed: bool,
}

impl CenterLine {
    /// Validates and builds a center line. For closed tracks the list is
    /// treated as periodic; a repeated final point is dropped.
    pub fn new(mut points: Vec<Vec2>, mut widths: Vec<f64>, closed: bool) -> Result<Self> {
        if widths.len() == 1 {
            widths = vec![widths[0]; points.len()];
        }
        if widths.len() != points.len() {
            return Err(Error::validation(format!(
                "{} widths given for {} points",
                widths.len(),
                points.len()
            )));
        }
        if closed && points.len() > 1 && points[0].distance(*points.last().unwrap()) < 1e-12 {
            points.pop();
            widths.pop();
        }
        if points.len() < 4 {
            return Err(Error::validation(format!(
                "center line needs at least 4 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("point {i} is not finite")));
        }
        if let Some(i) = widths.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation(format!(
                "track width at point {i} must be positive, got {}",
                widths[i]
            )));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for i in 1..points.len() {
            let d = points[i].distance(points[i - 1]);
            if d <= 0.0 {
                return Err(Error::validation(format!(
                    "points {} and {i} coincide",
                    i - 1
                )));
            }
            cumulative.push(cumulative[i - 1] + d);
        }
        let mut total_length = *cumulative.last().unwrap();
        if closed {
            let d = points[0].distance(*points.last().unwrap());
            total_length += d;
        }
        Ok(CenterLine {
            points,
            widths,
            cumulative_arc_length: cumulative,
            total_length,
            closed,
        })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn cumulative_arc_length(&self) -> &[f64] {
        &self.cumulative_arc_length
    }

    /// Polyline length, including the closing segment of a closed track.
    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cubic spline through the center-line points. Its chord-length
    /// parameter coincides with the polyline arc length at every point.
    pub fn spline(&self) -> Result<CubicSpline2> {
        CubicSpline2::new(&self.points, self.closed)
    }

    /// Track width at polyline arc length `s`, linearly interpolated.
    pub fn width_at(&self, s: f64) -> f64 {
        let n = self.points.len();
        let s = if self.closed {
            s.rem_euclid(self.total_length)
        } else {
            s.clamp(0.0, self.total_length)
        };
        let i = self.cumulative_arc_length.partition_point(|&c| c <= s);
        let i = i.saturating_sub(1);
        let (s0, w0) = (self.cumulative_arc_length[i], self.widths[i]);
        let (s1, w1) = if i + 1 < n {
            (self.cumulative_arc_length[i + 1], self.widths[i + 1])
        } else if self.closed {
            (self.total_length, self.widths[0])
        } else {
            return w0;
        };
        w0 + (w1 - w0) * (s - s0) / (s1 - s0)
    }

    /// Polyline segments, including the closing one for closed tracks.
    fn segments(&self) -> impl Iterator<Item = (usize, Vec2, Vec2)> + '_ {
        let n = self.points.len();
        let count = if self.closed { n } else { n - 1 };
        (0..count).map(move |i| (i, self.points[i], self.points[(i + 1) % n]))
    }

    /// Unit left-hand normals of the polyline, from central differences.
    pub fn polyline_normals(&self) -> Vec<Vec2> {
        polyline_normals(&self.points, self.closed)
    }
}

fn polyline_normals(points: &[Vec2], closed: bool) -> Vec<Vec2> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b) = if closed {
                (points[(i + n - 1) % n], points[(i + 1) % n])
            } else {
                (points[i.saturating_sub(1)], points[(i + 1).min(n - 1)])
            };
            (b - a).normalized().perp()
        })
        .collect()
}

/// Reads a track CSV file.
pub fn load_track(path: impl AsRef<Path>) -> Result<CenterLine> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        context: format!("cannot read track file {}", path.display()),
        source: e,
    })?;
    parse_track(&text)
}

/// Parses track CSV text.
///
/// The header names `x_m`, `y_m` and either `width_m` or the pair
/// `w_left_m`, `w_right_m`. Lines starting with `#` are comments; the
/// comment `# closed = true|false` marks the track as a lap. Without it a
/// track is closed when its first and last points coincide.
pub fn parse_track(text: &str) -> Result<CenterLine> {
    let mut closed: Option<bool> = None;
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "closed" {
                    closed = Some(match value.trim() {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(Error::Parse {
                                line: line_no,
                                message: format!("closed must be true or false, got '{other}'"),
                            })
                        }
                    });
                }
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if header.is_none() {
            header = Some((line_no, cells.iter().map(|c| c.to_string()).collect()));
            continue;
        }
        let expected = header.as_ref().unwrap().1.len();
        if cells.len() != expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {expected} columns, found {}", cells.len()),
            });
        }
        let values = cells
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("'{c}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line_no, values));
    }
    let (header_line, names) = header.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header row".into(),
    })?;
    let col = |name: &str| names.iter().position(|n| n == name);
    let (ix, iy) = match (col("x_m"), col("y_m")) {
        (Some(x), Some(y)) => (x, y),
        _ => {
            return Err(Error::Parse {
                line: header_line,
                message: "header must contain x_m and y_m".into(),
            })
        }
    };
    enum Widths {
        Symmetric(usize),
        Asymmetric(usize, usize),
    }
    let widths = match (col("width_m"), col("w_left_m"), col("w_right_m")) {
        (Some(w), _, _) => Widths::Symmetric(w),
        (None, Some(l), Some(r)) => Widths::Asymmetric(l, r),
        _ => {
            return Err(Error::Parse {
                line: header_line,
                message: "header must contain width_m or both w_left_m and w_right_m".into(),
            })
        }
    };
    for (line, v) in &rows {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line: *line,
                message: "non-finite value".into(),
            });
        }
    }

    let mut points: Vec<Vec2> = rows.iter().map(|(_, v)| Vec2::new(v[ix], v[iy])).collect();
    let closed = closed.unwrap_or_else(|| {
        points.len() > 1 && points[0].distance(*points.last().unwrap()) < 1e-12
    });
    let width_values: Vec<f64> = match widths {
        Widths::Symmetric(w) => rows.iter().map(|(_, v)| v[w]).collect(),
        Widths::Asymmetric(l, r) => {
            // Recentre between the two boundaries.
            if points.len() >= 2 {
                let normals = polyline_normals(&points, closed);
                for (i, (_, v)) in rows.iter().enumerate() {
                    let shift = 0.5 * (v[l] - v[r]);
                    points[i] = points[i] + normals[i] * shift;
                }
            }
            rows.iter().map(|(_, v)| v[l] + v[r]).collect()
        }
    };
    CenterLine::new(points, width_values, closed)
}

/// Fixed optimization nodes along the center line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub arc_positions: Vec<f64>,
    pub base_points: Vec<Vec2>,
    /// Unit left-hand normals of the center line at each node.
    pub normals: Vec<Vec2>,
    /// Half the track width at each node: the offset bound.
    pub half_widths: Vec<f64>,
    pub closed: bool,
}

impl NodeSet {
    pub fn node_count(&self) -> usize {
        self.arc_positions.len()
    }
}

/// Places `n` nodes along the center line with density
/// `1 + beta * |curvature| * track_length`, so corners get more nodes than
/// straights. Node 0 sits at arc position 0.
pub fn select_nodes(center: &CenterLine, n: usize) -> Result<NodeSet> {
    select_nodes_weighted(center, n, DEFAULT_CORNER_WEIGHT)
}

pub fn select_nodes_weighted(center: &CenterLine, n: usize, beta: f64) -> Result<NodeSet> {
    if !(MIN_NODES..=MAX_NODES).contains(&n) {
        return Err(Error::validation(format!(
            "node count must be in [{MIN_NODES}, {MAX_NODES}], got {n}"
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::validation("corner weight must be non-negative"));
    }
    let spline = center.spline()?;
    let length = spline.param_length();
    let grid = (8 * center.len()).max(4096);
    let dt = length / grid as f64;
    let density: Vec<f64> = (0..=grid)
        .map(|j| 1.0 + beta * spline.curvature(j as f64 * dt).abs() * length)
        .collect();
    let mut cdf = Vec::with_capacity(grid + 1);
    cdf.push(0.0);
    for j in 0..grid {
        cdf.push(cdf[j] + 0.5 * (density[j] + density[j + 1]) * dt);
    }
    let mass = cdf[grid];
    let denom = if center.is_closed() { n } else { n - 1 } as f64;
    let arc_positions: Vec<f64> = (0..n)
        .map(|i| {
            let target = mass * i as f64 / denom;
            let j = cdf.partition_point(|&c| c < target).clamp(1, grid);
            let (c0, c1) = (cdf[j - 1], cdf[j]);
            let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
            ((j - 1) as f64 + frac.clamp(0.0, 1.0)) * dt
        })
        .collect();
    let mut base_points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut half_widths = Vec::with_capacity(n);
    for &s in &arc_positions {
        let (p, d1, _) = spline.eval_all(s);
        base_points.push(p);
        normals.push(d1.normalized().perp());
        half_widths.push(0.5 * center.width_at(s));
    }
    Ok(NodeSet {
        arc_positions,
        base_points,
        normals,
        half_widths,
        closed: center.is_closed(),
    })
}

/// Lateral offsets of each node from the center line, metres, positive
/// along the node normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OffsetVector(pub Vec<f64>);

impl OffsetVector {
    pub fn zeros(n: usize) -> Self {
        OffsetVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks dimension and the box `|w_i| <= half_width_i`.
    pub fn check_bounds(&self, nodes: &NodeSet) -> Result<()> {
        if self.len() != nodes.node_count() {
            return Err(Error::validation(format!(
                "expected {} offsets, got {}",
                nodes.node_count(),
                self.len()
            )));
        }
        for (i, (&w, &hw)) in self.0.iter().zip(&nodes.half_widths).enumerate() {
            if !(w.abs() <= hw) {
                return Err(Error::OutOfBounds {
                    index: i,
                    value: w,
                    half_width: hw,
                });
            }
        }
        Ok(())
    }
}

/// Waypoint `i` is node `i` moved by `w_i` along its normal.
pub fn offsets_to_waypoints(nodes: &NodeSet, w: &OffsetVector) -> Result<Vec<Vec2>> {
    w.check_bounds(nodes)?;
    Ok(nodes
        .base_points
        .iter()
        .zip(&nodes.normals)
        .zip(&w.0)
        .map(|((&p, &nrm), &wi)| p + nrm * wi)
        .collect())
}

/// Offsets, waypoints and resampled spline path in one call.
pub fn trajectory(nodes: &NodeSet, w: &OffsetVector, resample: usize) -> Result<SampledPath> {
    let waypoints = offsets_to_waypoints(nodes, w)?;
    fit_and_resample(&waypoints, nodes.closed, resample)
}

/// Largest distance by which any path point lies outside the track, i.e.
/// beyond half the local width from the center-line polyline. Zero when the
/// whole path is inside.
pub fn boundary_overshoot(center: &CenterLine, path: &SampledPath) -> f64 {
    let cum = center.cumulative_arc_length();
    path.points
        .iter()
        .map(|&p| {
            let (mut best, mut best_s) = (f64::INFINITY, 0.0);
            for (i, a, b) in center.segments() {
                let d = point_segment_distance(p, a, b);
                if d < best {
                    best = d;
                    let ab = b - a;
                    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                    best_s = cum[i] + t * ab.norm();
                }
            }
            (best - 0.5 * center.width_at(best_s)).max(0.0)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle_center(r: f64, n: usize, width: f64) -> CenterLine {
        let pts = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        CenterLine::new(pts, vec![width], true).unwrap()
    }

    fn straight(len: f64, n: usize, width: f64) -> CenterLine {
        let pts = (0..n)
            .map(|i| Vec2::new(len * i as f64 / (n - 1) as f64, 0.0))
            .collect();
        CenterLine::new(pts, vec![width], false).unwrap()
    }

    #[test]
    fn collinear_csv_arc_length() {
        let c = parse_track("x_m,y_m,width_m\n0,0,1\n1,0,1\n2,0,1\n3,0,1\n").unwrap();
        assert_eq!(c.cumulative_arc_length(), &[0.0, 1.0, 2.0, 3.0]);
        assert!(!c.is_closed());
        assert_eq!(c.widths(), &[1.0; 4]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_track("# comment\nx_m,y_m,width_m\n0,0,1\n1,abc,1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e:?}"),
        }
        let err = parse_track("x_m,y_m,width_m\n0,0,1\n1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(matches!(
            parse_track("x_m,y_m,width_m\n0,0,1\n1,0,1\n2,0,1\n"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_track("x,y\n0,0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn polygon_perimeter_close_to_circle() {
        let r = 10.0;
        let n = 100;
        let mut text = String::from("# closed = true\nx_m,y_m,width_m\n");
        for i in 0..n {
            let a = 2.0 * PI * i as f64 / n as f64;
            text.push_str(&format!("{},{},2\n", r * a.cos(), r * a.sin()));
        }
        let c = parse_track(&text).unwrap();
        assert!(c.is_closed());
        // Regular n-gon perimeter 2 n r sin(pi / n).
        let polygon = 2.0 * n as f64 * r * (PI / n as f64).sin();
        assert!((c.total_length() - polygon).abs() < 1e-9);
        assert!((c.total_length() - 2.0 * PI * r).abs() / (2.0 * PI * r) < 0.01);
    }

    #[test]
    fn asymmetric_widths_recentre() {
        let text = "x_m,y_m,w_left_m,w_right_m\n0,0,3,1\n1,0,3,1\n2,0,3,1\n3,0,3,1\n";
        let c = parse_track(text).unwrap();
        assert_eq!(c.widths(), &[4.0; 4]);
        for p in c.points() {
            assert!((p.y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_first_point_marks_closed() {
        let text = "x_m,y_m,width_m\n0,0,1\n1,0,1\n1,1,1\n0,1,1\n0,0,1\n";
        let c = parse_track(text).unwrap();
        assert!(c.is_closed());
        assert_eq!(c.len(), 4);
        assert!((c.total_length() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn node_count_validated() {
        let c = straight(100.0, 11, 2.0);
        assert!(select_nodes(&c, 3).is_err());
        assert!(select_nodes(&c, 31).is_err());
        assert!(select_nodes(&c, 30).is_ok());
    }

    #[test]
    fn straight_nodes_are_uniform() {
        let c = straight(100.0, 11, 2.0);
        let nodes = select_nodes(&c, 5).unwrap();
        for (i, s) in nodes.arc_positions.iter().enumerate() {
            assert!((s - 25.0 * i as f64).abs() < 1e-6, "{s}");
        }
        for nrm in &nodes.normals {
            assert!((nrm.norm() - 1.0).abs() < 1e-9);
            assert!((nrm.y - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_nodes_are_uniform() {
        let c = circle_center(10.0, 200, 2.0);
        let nodes = select_nodes(&c, 8).unwrap();
        let l = c.total_length();
        for (i, s) in nodes.arc_positions.iter().enumerate() {
            assert!((s - l * i as f64 / 8.0).abs() < 1e-3 * l, "{i}: {s}");
        }
        assert_eq!(nodes.arc_positions[0], 0.0);
    }

    /// Open L-shaped track: 40 m along +x, a radius-5 quarter turn, 40 m along +y.
    fn l_track() -> (CenterLine, f64, f64) {
        let mut pts = Vec::new();
        for i in 0..40 {
            pts.push(Vec2::new(i as f64, 0.0));
        }
        let r = 5.0;
        for j in 0..=16 {
            let a = -PI / 2.0 + PI / 2.0 * j as f64 / 16.0;
            pts.push(Vec2::new(40.0 + r * a.cos(), r + r * a.sin()));
        }
        for i in 1..=40 {
            pts.push(Vec2::new(45.0, 5.0 + i as f64));
        }
        let c = CenterLine::new(pts, vec![3.0], false).unwrap();
        let corner_start = c.cumulative_arc_length()[39];
        let corner_end = c.cumulative_arc_length()[56];
        (c, corner_start, corner_end)
    }

    #[test]
    fn corner_gets_more_nodes_than_uniform() {
        let (c, a, b) = l_track();
        let n = 10;
        let nodes = select_nodes(&c, n).unwrap();
        let in_corner = |s: &f64| *s >= a && *s <= b;
        let weighted = nodes.arc_positions.iter().filter(|s| in_corner(s)).count();
        let l = c.total_length();
        let uniform = (0..n)
            .map(|i| l * i as f64 / (n - 1) as f64)
            .filter(in_corner)
            .count();
        assert!(weighted > uniform, "{weighted} vs {uniform}");
    }

    #[test]
    fn node_placement_is_deterministic() {
        let (c, _, _) = l_track();
        assert_eq!(select_nodes(&c, 12).unwrap(), select_nodes(&c, 12).unwrap());
    }

    #[test]
    fn waypoint_examples() {
        let c = straight(100.0, 11, 1.0);
        let nodes = select_nodes(&c, 6).unwrap();
        let zero = offsets_to_waypoints(&nodes, &OffsetVector::zeros(6)).unwrap();
        assert_eq!(zero, nodes.base_points);
        let w = OffsetVector(vec![0.1; 6]);
        for p in offsets_to_waypoints(&nodes, &w).unwrap() {
            assert!((p.y - 0.1).abs() < 1e-12);
        }
        let bad = OffsetVector(vec![0.0, 0.0, 0.6, 0.0, 0.0, 0.0]);
        assert!(matches!(
            offsets_to_waypoints(&nodes, &bad),
            Err(Error::OutOfBounds { index: 2, .. })
        ));
        assert!(offsets_to_waypoints(&nodes, &OffsetVector::zeros(5)).is_err());
    }

    #[test]
    fn circle_inward_offset_shrinks_radius() {
        let c = circle_center(10.0, 300, 4.0);
        let nodes = select_nodes(&c, 8).unwrap();
        let wps = offsets_to_waypoints(&nodes, &OffsetVector(vec![1.5; 8])).unwrap();
        for p in wps {
            assert!((p.norm() - 8.5).abs() < 1e-6, "{}", p.norm());
        }
    }

    #[test]
    fn centerline_path_length_matches_polyline() {
        let c = circle_center(10.0, 100, 2.0);
        let nodes = select_nodes(&c, 10).unwrap();
        let path = trajectory(&nodes, &OffsetVector::zeros(10), 100).unwrap();
        let rel = (path.total_length() - c.total_length()).abs() / c.total_length();
        assert!(rel < 0.01, "{rel}");
        assert!(boundary_overshoot(&c, &path) < 1e-6);
    }
}
