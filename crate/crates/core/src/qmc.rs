//! Randomly shifted Halton points in the unit cube.

use rand::Rng;

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// `count` points in `[0, 1)^dim`: Halton sequence (skipping the origin)
/// with a random Cranley-Patterson shift per dimension.
pub fn shifted_halton<R: Rng>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton sequence limited to {} dimensions", PRIMES.len());
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

/// Unshifted Halton points, for deterministic multi-start designs.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    (1..=count as u64)
        .map(|i| (0..dim).map(|d| radical_inverse(i, PRIMES[d])).collect())
        .collect()
}
