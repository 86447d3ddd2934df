//! Minimum-time speed profiles on a fixed path under a friction-circle
//! vehicle model with a rear-wheel-drive propulsion cap.
//!
//! The path is a chain of stations. Speeds are handled through `b = v^2`,
//! which makes the longitudinal acceleration over a segment constant:
//! `a = (b[k+1] - b[k]) / (2 ds)`. Each station owns the segment that leaves
//! it: the friction circle `a^2 + (b κ_k)^2 <= (mu_s g)^2` must hold on that
//! segment for the faster of its two end speeds, and the drive cap bounds `a`
//! from above.
//!
//! With the lateral load taken at the faster end, the largest end speed
//! reachable from a given start speed (and the largest start speed that can
//! still brake to a given end speed) is nondecreasing. Feasible profiles are
//! then closed under pointwise maximum, so a pointwise cornering cap followed
//! by one forward and one backward sweep yields the fastest feasible profile.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::spline::SampledPath;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Curvature below which a station counts as straight.
pub const KAPPA_MIN: f64 = 1e-9;

/// Speed floor used in segment time integration, m/s.
pub const V_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Mass, kg.
    pub mass: f64,
    /// Center of gravity to front axle, m.
    pub l_f: f64,
    /// Center of gravity to rear axle, m.
    pub l_r: f64,
    /// Static friction coefficient.
    pub mu_s: f64,
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
    /// Speed cap on straights, m/s.
    pub v_cap: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 1.0,
            l_f: 1.0,
            l_r: 1.0,
            mu_s: 1.0,
            g: 9.81,
            v_cap: 50.0,
        }
    }
}

impl VehicleParams {
    /// 1:43 scale car in the style of the ETH Zurich miniature racing
    /// platform.
    pub fn small_scale() -> Self {
        VehicleParams {
            mass: 0.041,
            l_f: 0.029,
            l_r: 0.033,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.mass > 0.0, "mass must be positive"),
            (self.l_f > 0.0, "l_f must be positive"),
            (self.l_r > 0.0, "l_r must be positive"),
            (self.mu_s > 0.0 && self.mu_s <= 2.0, "mu_s must be in (0, 2]"),
            (self.g > 0.0, "g must be positive"),
            (self.v_cap > 0.0, "v_cap must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::validation(msg));
            }
        }
        let all_finite = [self.mass, self.l_f, self.l_r, self.mu_s, self.g, self.v_cap]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::validation("vehicle parameters must be finite"));
        }
        Ok(())
    }

    /// Share of the friction limit available for propulsion, `l_f / (l_f + l_r)`.
    pub fn drive_fraction(&self) -> f64 {
        self.l_f / (self.l_f + self.l_r)
    }

    /// Friction-circle radius in acceleration units, `mu_s g`.
    pub fn friction_accel(&self) -> f64 {
        self.mu_s * self.g
    }
}

/// Highest steady speed through curvature `kappa`: `sqrt(mu_s g / |kappa|)`,
/// never above `v_cap`.
pub fn max_cornering_speed(kappa: f64, params: &VehicleParams) -> f64 {
    if kappa.abs() < KAPPA_MIN {
        return params.v_cap;
    }
    (params.friction_accel() / kappa.abs()).sqrt().min(params.v_cap)
}

/// Speed, force and acceleration at every station of a path.
///
/// Closed paths carry one more station than path points: the finish line,
/// which coincides with the start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub arc: Vec<f64>,
    pub points: Vec<Vec2>,
    pub speeds: Vec<f64>,
    pub times: Vec<f64>,
    pub long_force: Vec<f64>,
    pub lat_force: Vec<f64>,
    /// Acceleration over the segment starting at each station; zero at the
    /// last station.
    pub long_accel: Vec<f64>,
    pub lat_accel: Vec<f64>,
    /// Lateral acceleration at the faster end of each segment, the load the
    /// friction limit is checked against.
    pub peak_lat_accel: Vec<f64>,
    pub lap_time: f64,
    /// `mu_s g` of the vehicle the profile was computed for.
    pub friction_accel: f64,
    /// Drive cap `l_f/(l_f+l_r) mu_s g`.
    pub drive_accel: f64,
}

impl SpeedProfile {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    /// Writes `s_m,x_m,y_m,v_mps,t_s,a_long_mps2,a_lat_mps2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s_m,x_m,y_m,v_mps,t_s,a_long_mps2,a_lat_mps2")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.arc[k],
                self.points[k].x,
                self.points[k].y,
                self.speeds[k],
                self.times[k],
                self.long_accel[k],
                self.lat_accel[k]
            )?;
        }
        Ok(())
    }
}

/// GG diagram points `(a_lat, a_long)`, one per segment: the segment's
/// longitudinal acceleration with its peak lateral acceleration.
pub fn gg_points(profile: &SpeedProfile) -> Vec<(f64, f64)> {
    let segments = profile.len().saturating_sub(1);
    profile.peak_lat_accel[..segments]
        .iter()
        .zip(&profile.long_accel)
        .map(|(&lat, &long)| (lat, long))
        .collect()
}

/// Station geometry and limits in acceleration units, shared by the sweeps.
#[derive(Debug, Clone)]
pub struct Stations {
    pub curvature: Vec<f64>,
    /// `ds[k]` is the length of the segment from station k to k+1.
    pub ds: Vec<f64>,
    /// Pointwise cap on `v^2`.
    pub cap: Vec<f64>,
    pub friction: f64,
    pub drive: f64,
}

impl Stations {
    pub fn new(path: &SampledPath, params: &VehicleParams) -> Result<Self> {
        let mut curvature = path.curvature.clone();
        if path.closed {
            curvature.push(path.curvature[0]);
        }
        let cap: Vec<f64> = curvature
            .iter()
            .map(|&k| {
                let v = max_cornering_speed(k, params);
                v * v
            })
            .collect();
        if let Some(station) = cap.iter().position(|c| !(*c > 0.0)) {
            return Err(Error::DegeneratePath { station });
        }
        Ok(Stations {
            curvature,
            ds: path.segment_lengths.clone(),
            cap,
            friction: params.friction_accel(),
            drive: params.drive_fraction() * params.friction_accel(),
        })
    }

    pub fn len(&self) -> usize {
        self.cap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cap.is_empty()
    }

    /// Largest `y >= x` with `(y - x)^2 <= (2 ds)^2 (A^2 - (y κ_k)^2)`: the
    /// fastest end of segment `k` whose other end moves at `v^2 = x`, using
    /// only friction. Returns `x` when even constant speed exceeds the grip.
    fn friction_reach(&self, k: usize, x: f64) -> f64 {
        let d = 2.0 * self.ds[k];
        let kap = self.curvature[k];
        let a = self.friction;
        let q = 1.0 + d * d * kap * kap;
        let disc = x * x - q * (x * x - d * d * a * a);
        if disc < 0.0 {
            return x;
        }
        ((x + disc.sqrt()) / q).max(x)
    }

    /// Largest `v^2` reachable at station `k+1` from `b` at station `k`.
    pub fn accelerate(&self, k: usize, b: f64) -> f64 {
        (b + 2.0 * self.ds[k] * self.drive).min(self.friction_reach(k, b))
    }

    /// Largest `v^2` at station `k` from which the car can brake to `next`
    /// at station `k+1`.
    pub fn brake_from(&self, k: usize, next: f64) -> f64 {
        self.friction_reach(k, next)
    }

    /// Forward sweep: `b[k+1] = min(b[k+1], accelerate(k, b[k]))`.
    pub fn forward_pass(&self, b: &mut [f64]) {
        for k in 0..b.len() - 1 {
            b[k + 1] = b[k + 1].min(self.accelerate(k, b[k]));
        }
    }

    /// Backward sweep: `b[k] = min(b[k], brake_from(k, b[k+1]))`.
    pub fn backward_pass(&self, b: &mut [f64]) {
        for k in (0..b.len() - 1).rev() {
            b[k] = b[k].min(self.brake_from(k, b[k + 1]));
        }
    }
}

/// Pluggable fixed-path minimum-time solver.
pub trait SpeedSolver {
    fn solve(&self, path: &SampledPath, params: &VehicleParams, v0: f64) -> Result<SpeedProfile>;
}

/// Cornering cap, forward drive-limited sweep, backward braking sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardBackward;

impl SpeedSolver for ForwardBackward {
    fn solve(&self, path: &SampledPath, params: &VehicleParams, v0: f64) -> Result<SpeedProfile> {
        params.validate()?;
        if !(v0 >= 0.0 && v0.is_finite()) {
            return Err(Error::validation(format!("initial speed {v0} must be >= 0")));
        }
        let st = Stations::new(path, params)?;
        let b0 = v0 * v0;
        if b0 > st.cap[0] * (1.0 + 1e-12) {
            return Err(Error::InfeasibleStart {
                v0,
                limit: st.cap[0].sqrt(),
            });
        }
        let mut b = st.cap.clone();
        b[0] = b0;
        st.forward_pass(&mut b);
        st.backward_pass(&mut b);
        if b[0] < b0 * (1.0 - 1e-12) {
            return Err(Error::InfeasibleStart {
                v0,
                limit: b[0].sqrt(),
            });
        }
        Ok(assemble(path, params, &st, &b))
    }
}

/// Builds the profile from squared speeds at every station.
pub fn assemble(path: &SampledPath, params: &VehicleParams, st: &Stations, b: &[f64]) -> SpeedProfile {
    let n = b.len();
    let speeds: Vec<f64> = b.iter().map(|x| x.max(0.0).sqrt()).collect();
    let mut times = Vec::with_capacity(n);
    times.push(0.0);
    for k in 0..n - 1 {
        let mean = 0.5 * (speeds[k] + speeds[k + 1]);
        times.push(times[k] + st.ds[k] / mean.max(V_FLOOR));
    }
    let long_accel: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 < n {
                (b[k + 1] - b[k]) / (2.0 * st.ds[k])
            } else {
                0.0
            }
        })
        .collect();
    let lat_accel: Vec<f64> = (0..n).map(|k| b[k] * st.curvature[k]).collect();
    let peak_lat_accel: Vec<f64> = (0..n)
        .map(|k| b[k].max(b[(k + 1).min(n - 1)]) * st.curvature[k])
        .collect();
    let mut points = path.points.clone();
    if path.closed {
        points.push(path.points[0]);
    }
    SpeedProfile {
        arc: path.station_arc(),
        points,
        lap_time: times[n - 1],
        times,
        long_force: long_accel.iter().map(|a| a * params.mass).collect(),
        lat_force: lat_accel.iter().map(|a| a * params.mass).collect(),
        long_accel,
        lat_accel,
        peak_lat_accel,
        speeds,
        friction_accel: st.friction,
        drive_accel: st.drive,
    }
}

/// Minimum-time profile with the default solver.
pub fn solve_speed_profile(path: &SampledPath, params: &VehicleParams, v0: f64) -> Result<SpeedProfile> {
    ForwardBackward.solve(path, params, v0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::fit_and_resample;
    use std::f64::consts::PI;

    fn straight_path(len: f64, k: usize) -> SampledPath {
        let pts = (0..k)
            .map(|i| Vec2::new(len * i as f64 / (k - 1) as f64, 0.0))
            .collect();
        SampledPath::new(pts, vec![0.0; k], vec![0.0; k], false).unwrap()
    }

    fn circle_path(r: f64, k: usize) -> SampledPath {
        let wps: Vec<Vec2> = (0..24)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 24.0;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        fit_and_resample(&wps, true, k).unwrap()
    }

    #[test]
    fn cornering_speed_examples() {
        let p = VehicleParams::default();
        assert!((max_cornering_speed(0.1, &p) - 98.1f64.sqrt()).abs() < 1e-12);
        assert!((max_cornering_speed(0.1, &p) - 9.9045).abs() < 1e-4);
        assert_eq!(max_cornering_speed(0.0, &p), 50.0);
        assert_eq!(max_cornering_speed(-0.1, &p), max_cornering_speed(0.1, &p));
    }

    #[test]
    fn straight_launch_matches_kinematics() {
        let p = VehicleParams::default();
        let prof = solve_speed_profile(&straight_path(100.0, 100), &p, 0.0).unwrap();
        let expected = (200.0f64 / 4.905).sqrt();
        assert!((prof.lap_time - expected).abs() / expected < 0.005);
        assert!((prof.lap_time - 6.3855).abs() < 1e-3);
        for (lat, long) in gg_points(&prof) {
            assert_eq!(lat, 0.0);
            assert!((0.0..=4.905 + 1e-9).contains(&long));
        }
    }

    #[test]
    fn circle_speed_bounded_and_saturates() {
        let p = VehicleParams::default();
        let r = 10.0;
        let path = circle_path(r, 100);
        let prof = solve_speed_profile(&path, &p, 0.0).unwrap();
        let bound = (9.81 * r).sqrt();
        let mut caps = path.curvature.clone();
        caps.push(path.curvature[0]);
        for (v, k) in prof.speeds.iter().zip(&caps) {
            assert!(*v <= (9.81 / k.abs()).sqrt() * (1.0 + 1e-9));
            assert!(*v <= bound * 1.01);
        }
        let tail = &prof.speeds[prof.len() / 2..];
        for v in tail {
            assert!((v - bound).abs() / bound < 0.01);
        }
        for a in &prof.lat_accel[prof.len() / 2..] {
            assert!((a.abs() - 9.81).abs() / 9.81 < 0.02);
        }
    }

    #[test]
    fn infeasible_start_rejected() {
        let p = VehicleParams::default();
        let path = circle_path(10.0, 100);
        assert!(matches!(
            solve_speed_profile(&path, &p, 20.0),
            Err(Error::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn infinite_curvature_is_degenerate() {
        let mut path = straight_path(10.0, 60);
        path.curvature[7] = f64::INFINITY;
        assert!(matches!(
            solve_speed_profile(&path, &VehicleParams::default(), 0.0),
            Err(Error::DegeneratePath { station: 7 })
        ));
    }

    #[test]
    fn mass_does_not_change_speeds() {
        let path = circle_path(7.0, 80);
        let a = VehicleParams { mass: 1.0, ..Default::default() };
        let b = VehicleParams { mass: 5.0, ..Default::default() };
        let pa = solve_speed_profile(&path, &a, 0.0).unwrap();
        let pb = solve_speed_profile(&path, &b, 0.0).unwrap();
        assert_eq!(pa.speeds, pb.speeds);
        assert_eq!(pa.lap_time, pb.lap_time);
        assert!((pb.long_force[3] - 5.0 * pa.long_force[3]).abs() < 1e-12);
    }

    #[test]
    fn profile_csv_has_header_and_rows() {
        let prof = solve_speed_profile(&straight_path(10.0, 50), &VehicleParams::default(), 0.0).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s_m,x_m,y_m,v_mps,t_s,a_long_mps2,a_lat_mps2");
        assert_eq!(lines.count(), 50);
    }

    #[test]
    fn validate_rejects_bad_params() {
        let p = VehicleParams { mu_s: 2.5, ..Default::default() };
        assert!(p.validate().is_err());
        let p = VehicleParams { l_f: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        assert!((VehicleParams::small_scale().drive_fraction() - 0.029 / 0.062).abs() < 1e-15);
    }
}
