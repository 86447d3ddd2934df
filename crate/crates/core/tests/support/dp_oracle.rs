//! Brute-force minimum-time oracle: dynamic programming over a grid of
//! squared speeds at every station.
//!
//! Station data are rebuilt from the raw path samples. A transition from
//! `b_k` to `b_{k+1}` is allowed when the segment acceleration
//! `(b_{k+1} - b_k) / (2 ds_k)` respects the drive cap and, together with the
//! lateral acceleration `max(b_k, b_{k+1}) κ_k`, stays inside the friction
//! circle. Segment times use the trapezoidal mean speed. The grid is doubled until two
//! successive answers agree to `tolerance`.

use raceline::speed::VehicleParams;
use raceline::spline::SampledPath;

#[allow(dead_code)]
pub struct DpResult {
    pub lap_time: f64,
    pub grid: usize,
    pub relative_change: f64,
}

struct Problem {
    kappa: Vec<f64>,
    ds: Vec<f64>,
    cap: Vec<f64>,
    friction: f64,
    drive: f64,
    v0: f64,
}

impl Problem {
    fn new(path: &SampledPath, params: &VehicleParams, v0: f64) -> Self {
        let k = path.points.len();
        let n_seg = if path.closed { k } else { k - 1 };
        let ds: Vec<f64> = (0..n_seg)
            .map(|i| {
                let a = path.points[i];
                let b = path.points[(i + 1) % k];
                ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt()
            })
            .collect();
        let kappa: Vec<f64> = (0..=n_seg).map(|i| path.curvature[i % k]).collect();
        let friction = params.mu_s * params.g;
        let cap = kappa
            .iter()
            .map(|c| {
                let corner = if c.abs() < 1e-9 { f64::INFINITY } else { friction / c.abs() };
                corner.min(params.v_cap * params.v_cap)
            })
            .collect();
        Problem {
            kappa,
            ds,
            cap,
            friction,
            drive: params.l_f / (params.l_f + params.l_r) * friction,
            v0,
        }
    }

    fn solve(&self, grid: usize) -> f64 {
        let b_max = self.cap.iter().cloned().fold(0.0f64, f64::max);
        let b0 = self.v0 * self.v0;
        let values: Vec<f64> = (0..=grid).map(|j| b_max * j as f64 / grid as f64).collect();
        let n = self.kappa.len();
        let mut cost = vec![f64::INFINITY; values.len()];
        // The start speed is exact; snap it onto the grid from below.
        let start = values.iter().rposition(|&b| b <= b0 * (1.0 + 1e-12)).unwrap();
        cost[start] = 0.0;
        let speeds: Vec<f64> = values.iter().map(|b| b.sqrt()).collect();
        for k in 0..n - 1 {
            let mut next = vec![f64::INFINITY; values.len()];
            let two_ds = 2.0 * self.ds[k];
            for (i, &bi) in values.iter().enumerate() {
                if !cost[i].is_finite() || bi > self.cap[k] * (1.0 + 1e-12) {
                    continue;
                }
                for (j, &bj) in values.iter().enumerate() {
                    if bj > self.cap[k + 1] * (1.0 + 1e-12) {
                        break;
                    }
                    let a = (bj - bi) / two_ds;
                    let lat = bi.max(bj) * self.kappa[k];
                    if a > self.drive || a * a + lat * lat > self.friction * self.friction {
                        continue;
                    }
                    let mean = 0.5 * (speeds[i] + speeds[j]);
                    let t = cost[i] + self.ds[k] / mean.max(1e-3);
                    if t < next[j] {
                        next[j] = t;
                    }
                }
            }
            cost = next;
        }
        cost.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Minimum lap time by grid DP, refined until successive grids agree to
/// `tolerance` (relative) or `max_grid` is reached.
pub fn dp_lap_time(path: &SampledPath, params: &VehicleParams, v0: f64, tolerance: f64, max_grid: usize) -> DpResult {
    let problem = Problem::new(path, params, v0);
    let mut grid = 200;
    let mut prev = problem.solve(grid);
    loop {
        let next_grid = grid * 2;
        let t = problem.solve(next_grid);
        let change = (prev - t).abs() / t;
        if change < tolerance || next_grid >= max_grid {
            return DpResult {
                lap_time: t,
                grid: next_grid,
                relative_change: change,
            };
        }
        grid = next_grid;
        prev = t;
    }
}
