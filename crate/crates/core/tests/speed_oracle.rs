mod support;

use raceline::speed::{solve_speed_profile, VehicleParams};
use raceline::spline::fit_and_resample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::dp_oracle::dp_lap_time;
use support::paths::{wiggly_loop, wiggly_open};

#[test]
fn forward_backward_matches_dp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = VehicleParams {
        v_cap: 12.0,
        ..Default::default()
    };
    for case in 0..20 {
        let closed = case % 2 == 0;
        let k = rng.gen_range(50..=60);
        let wps = if closed { wiggly_loop(&mut rng, 30) } else { wiggly_open(&mut rng, 31) };
        let path = fit_and_resample(&wps, closed, k).unwrap();
        let fb = solve_speed_profile(&path, &params, 0.0).unwrap().lap_time;
        let dp = dp_lap_time(&path, &params, 0.0, 0.002, 6400);
        assert!(dp.relative_change < 0.002, "case {case}: DP grid not self-consistent");
        let rel = (fb - dp.lap_time).abs() / dp.lap_time;
        assert!(rel < 0.01, "case {case}: forward-backward {fb} vs DP {} ({rel:e})", dp.lap_time);
        // Grid restrictions can only slow the DP down.
        assert!(fb <= dp.lap_time * (1.0 + 1e-9), "case {case}: {fb} > {}", dp.lap_time);
    }
}
