//! Lap-time evaluation of a candidate offset vector: offsets to waypoints,
//! spline fit and resampling, then the minimum-time speed profile.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::speed::{solve_speed_profile, SpeedProfile, VehicleParams};
use crate::spline::{fit_and_resample, SampledPath};
use crate::track::{offsets_to_waypoints, select_nodes, CenterLine, NodeSet, OffsetVector};

/// Default number of resampled points per candidate.
pub const DEFAULT_RESAMPLE: usize = 100;

/// Everything computed for one candidate trajectory.
#[derive(Debug, Clone)]
pub struct LapEvaluation {
    pub offsets: OffsetVector,
    pub waypoints: Vec<Vec2>,
    pub path: SampledPath,
    pub profile: SpeedProfile,
}

impl LapEvaluation {
    pub fn lap_time(&self) -> f64 {
        self.profile.lap_time
    }
}

/// Maps offset vectors to minimum lap times on a fixed track and vehicle.
#[derive(Debug, Clone)]
pub struct LapTimeEvaluator {
    pub nodes: NodeSet,
    pub vehicle: VehicleParams,
    pub resample: usize,
    /// Speed at the start line, m/s.
    pub v0: f64,
}

impl LapTimeEvaluator {
    pub fn new(nodes: NodeSet, vehicle: VehicleParams, resample: usize) -> Result<Self> {
        vehicle.validate()?;
        if resample < crate::spline::MIN_RESAMPLE {
            return Err(Error::validation(format!(
                "resample count {resample} below the minimum of {}",
                crate::spline::MIN_RESAMPLE
            )));
        }
        Ok(LapTimeEvaluator {
            nodes,
            vehicle,
            resample,
            v0: 0.0,
        })
    }

    /// Places `node_count` nodes on `center` and builds the evaluator.
    pub fn for_track(center: &CenterLine, vehicle: VehicleParams, node_count: usize, resample: usize) -> Result<Self> {
        Self::new(select_nodes(center, node_count)?, vehicle, resample)
    }

    pub fn dim(&self) -> usize {
        self.nodes.node_count()
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.nodes.half_widths
    }

    pub fn evaluate_full(&self, w: &OffsetVector) -> Result<LapEvaluation> {
        let waypoints = offsets_to_waypoints(&self.nodes, w)?;
        let path = fit_and_resample(&waypoints, self.nodes.closed, self.resample)?;
        let profile = solve_speed_profile(&path, &self.vehicle, self.v0)?;
        Ok(LapEvaluation {
            offsets: w.clone(),
            waypoints,
            path,
            profile,
        })
    }

    /// Minimum time to traverse the trajectory described by `w`.
    pub fn lap_time(&self, w: &OffsetVector) -> Result<f64> {
        self.evaluate_full(w).map(|e| e.lap_time())
    }

    /// Offsets from unit-box coordinates in `[-1, 1]`.
    pub fn from_unit(&self, u: &[f64]) -> OffsetVector {
        OffsetVector(
            u.iter()
                .zip(&self.nodes.half_widths)
                .map(|(v, hw)| v.clamp(-1.0, 1.0) * hw)
                .collect(),
        )
    }

    /// Uniform draw from the offset box.
    pub fn random_offsets<R: rand::Rng>(&self, rng: &mut R) -> OffsetVector {
        OffsetVector(
            self.nodes
                .half_widths
                .iter()
                .map(|hw| rng.gen_range(-1.0..=1.0) * hw)
                .collect(),
        )
    }

    /// Unit-box coordinates of `w`.
    pub fn to_unit(&self, w: &OffsetVector) -> Vec<f64> {
        w.0.iter()
            .zip(&self.nodes.half_widths)
            .map(|(v, hw)| v / hw)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ring(r: f64, width: f64) -> CenterLine {
        let pts = (0..120)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 120.0;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        CenterLine::new(pts, vec![width], true).unwrap()
    }

    #[test]
    fn unit_round_trip_and_bounds() {
        let ev = LapTimeEvaluator::for_track(&ring(10.0, 2.0), VehicleParams::default(), 8, 100).unwrap();
        let w = OffsetVector(vec![0.3, -1.0, 1.0, 0.0, 0.5, -0.2, 0.9, -0.9]);
        let back = ev.from_unit(&ev.to_unit(&w));
        for (a, b) in w.0.iter().zip(&back.0) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(ev.from_unit(&[1.0; 8]).check_bounds(&ev.nodes).is_ok());
    }

    #[test]
    fn inner_line_is_faster_on_a_ring() {
        let ev = LapTimeEvaluator::for_track(&ring(10.0, 4.0), VehicleParams::default(), 8, 100).unwrap();
        let center = ev.lap_time(&OffsetVector::zeros(8)).unwrap();
        let inner = ev.lap_time(&OffsetVector(vec![1.5; 8])).unwrap();
        assert!(inner < center);
    }
}
