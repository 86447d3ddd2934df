//! Random test paths shared by the oracle tests.

use raceline::geometry::Vec2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Closed loop of `n` waypoints on a noisy ellipse.
pub fn wiggly_loop(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    let (ax, ay) = (rng.gen_range(8.0..15.0), rng.gen_range(5.0..10.0));
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = 1.0 + rng.gen_range(-0.12..0.12);
            Vec2::new(ax * r * t.cos(), ay * r * t.sin())
        })
        .collect()
}

/// Open path of `n` waypoints from a smoothed random walk.
pub fn wiggly_open(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    let mut heading: f64 = 0.0;
    let mut p = Vec2::new(0.0, 0.0);
    let mut pts = vec![p];
    for _ in 1..n {
        heading += rng.gen_range(-0.5..0.5);
        let step = rng.gen_range(1.5..3.0);
        p = p + Vec2::new(step * heading.cos(), step * heading.sin());
        pts.push(p);
    }
    pts
}
