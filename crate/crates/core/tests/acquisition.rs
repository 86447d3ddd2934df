use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raceline::bayesopt::{expected_improvement, maximize_unit, AcquisitionFn, NeiFantasies, OptConfig};
use raceline::gp::{Dataset, FittedGP, Hyperparams};
use raceline::par::Parallelism;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[test]
fn ei_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let samples = 1_000_000;
    for case in 0..50 {
        let mean = rng.gen_range(3.0..6.0);
        let sd = rng.gen_range(0.01..1.0);
        let tau = mean + sd * rng.gen_range(-2.5..2.5);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let gain = (tau - (mean + sd * gaussian(&mut rng))).max(0.0);
            sum += gain;
            sum_sq += gain * gain;
        }
        let mc = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mc * mc) / samples as f64).sqrt();
        let ei = expected_improvement(mean, sd * sd, tau);
        assert!((ei - mc).abs() <= 3.0 * se, "case {case}: closed form {ei}, mc {mc} ± {se}");
    }
}

#[test]
fn ei_with_zero_variance_is_the_plain_gain() {
    assert_eq!(expected_improvement(4.0, 0.0, 5.0), 1.0);
    assert_eq!(expected_improvement(5.0, 0.0, 4.0), 0.0);
    assert_eq!(expected_improvement(4.5, 0.0, 4.5), 0.0);
    assert_eq!(expected_improvement(4.0, -1e-18, 4.25), 0.25);
}

fn random_model(seed: u64, n: usize, dim: usize, noise: f64) -> FittedGP {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let outputs = inputs
        .iter()
        .map(|x| 5.0 + x.iter().map(|v| (2.0 * v).sin()).sum::<f64>() * 0.4)
        .collect();
    let data = Dataset::new(inputs, outputs).unwrap();
    FittedGP::with_hyperparams(data, Hyperparams::isotropic(0.6, 1.0, noise)).unwrap()
}

fn tau_best(model: &FittedGP) -> f64 {
    model.dataset().outputs.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn ei_vanishes_at_noiselessly_observed_inputs() {
    for seed in 0..10 {
        let model = random_model(seed, 8, 3, 0.0);
        let tau = tau_best(&model);
        for x in &model.dataset().inputs {
            let (m, v) = model.predict(x).unwrap();
            let ei = expected_improvement(m, v, tau) / model.output_scale();
            assert!(ei <= 1e-6, "seed {seed}: EI {ei} (standardized)");
        }
    }
}

#[test]
fn nei_reduces_to_ei_without_noise() {
    let model = random_model(3, 10, 2, 0.0);
    let tau = tau_best(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let nei = NeiFantasies::sample(&model, 64, &mut rng).unwrap();
    let mut compared = 0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (m, v) = model.predict(&x).unwrap();
        let ei = expected_improvement(m, v, tau);
        if ei < 1e-4 * model.output_scale() {
            continue;
        }
        compared += 1;
        let n = nei.value(&model, &x);
        assert!((n - ei).abs() <= 0.05 * ei, "NEI {n} vs EI {ei}");
    }
    assert!(compared > 20);
}

#[test]
fn nei_vanishes_at_observed_inputs_without_noise() {
    let model = random_model(8, 10, 3, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let nei = NeiFantasies::sample(&model, 32, &mut rng).unwrap();
    for x in &model.dataset().inputs {
        let v = nei.value(&model, x) / model.output_scale();
        assert!(v < 1e-6, "NEI {v} (standardized)");
    }
}

#[test]
fn nei_is_deterministic_given_the_seed() {
    let model = random_model(5, 12, 4, 1e-3);
    let x = [0.1, -0.3, 0.5, 0.0];
    let value = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NeiFantasies::sample(&model, 32, &mut rng).unwrap().value(&model, &x)
    };
    assert_eq!(value(7).to_bits(), value(7).to_bits());
    assert!(value(7) >= 0.0);
}

#[test]
fn maximizer_finds_the_grid_optimum_in_one_dimension() {
    for seed in 0..5 {
        let model = random_model(40 + seed, 5, 1, 1e-6);
        let acq = AcquisitionFn::Ei { tau_best: tau_best(&model) };
        let grid_best = (0..=100_000)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 100_000.0;
                acq.value(&model, &[x.clamp(-1.0 + 1e-9, 1.0 - 1e-9)])
            })
            .fold(0.0, f64::max);
        let config = OptConfig {
            acq_candidates: 64,
            acq_restarts: 4,
            parallelism: Parallelism::Sequential,
            ..OptConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, v) = maximize_unit(&model, &acq, 1, &model.dataset().inputs, &config, &mut rng);
        assert!(x[0].abs() < 1.0);
        assert!((v - acq.value(&model, &x)).abs() < 1e-15);
        assert!(v >= grid_best - 1e-6 * grid_best.max(1e-12), "seed {seed}: {v} vs grid {grid_best}");
    }
}

#[test]
fn acquisition_handles_a_flat_dataset() {
    let inputs = vec![vec![-0.5, 0.2], vec![0.3, 0.9], vec![0.7, -0.4]];
    let data = Dataset::new(inputs, vec![4.0; 3]).unwrap();
    let model = FittedGP::fit(data).unwrap();
    let acq = AcquisitionFn::Ei { tau_best: 4.0 };
    for x in [[0.0, 0.0], [-0.5, 0.2], [0.99, 0.99]] {
        let v = acq.value(&model, &x);
        assert!(v.is_finite() && v >= 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let nei = NeiFantasies::sample(&model, 8, &mut rng).unwrap();
    assert!(nei.value(&model, &[0.1, 0.1]).is_finite());
}
