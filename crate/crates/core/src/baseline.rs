//! Uniform random search and multi-run convergence statistics.

use crate::bayesopt::{self, Acquisition, OptConfig};
use crate::error::{Error, Result};
use crate::lap::LapTimeEvaluator;
use crate::par::{self, Parallelism};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Best lap time after each evaluation of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub best_so_far: Vec<f64>,
    pub seed: u64,
    /// Evaluations that produced no lap time.
    pub infeasible: usize,
}

impl ConvergenceCurve {
    pub fn final_best(&self) -> f64 {
        *self.best_so_far.last().unwrap_or(&f64::INFINITY)
    }

    fn from_taus(taus: impl IntoIterator<Item = Option<f64>>, seed: u64) -> Self {
        let mut best = f64::INFINITY;
        let mut infeasible = 0;
        let best_so_far = taus
            .into_iter()
            .map(|t| {
                match t {
                    Some(t) => best = best.min(t),
                    None => infeasible += 1,
                }
                best
            })
            .collect();
        ConvergenceCurve {
            best_so_far,
            seed,
            infeasible,
        }
    }
}

/// Evaluates `n_evals` offset vectors drawn uniformly from the box.
///
/// Infeasible draws use up an evaluation without improving the curve.
pub fn random_search(evaluator: &LapTimeEvaluator, n_evals: usize, seed: u64, parallelism: Parallelism) -> Result<ConvergenceCurve> {
    if n_evals == 0 {
        return Err(Error::validation("random search needs at least one evaluation"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<_> = (0..n_evals).map(|_| evaluator.random_offsets(&mut rng)).collect();
    let taus = par::map(parallelism, &draws, |w| evaluator.lap_time(w).ok());
    Ok(ConvergenceCurve::from_taus(taus, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Ei,
    Nei,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Random, Method::Ei, Method::Nei];

    pub fn label(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Ei => "ei",
            Method::Nei => "nei",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Method::Random),
            "ei" => Ok(Method::Ei),
            "nei" => Ok(Method::Nei),
            other => Err(Error::validation(format!(
                "unknown method '{other}' (valid: random, ei, nei)"
            ))),
        }
    }
}

/// Settings shared by every method in a comparison.
#[derive(Debug, Clone)]
pub struct CompareSetup {
    /// Evaluations per run, initialization samples included.
    pub evaluations: usize,
    /// BayesOpt settings; `budget` is derived from `evaluations`.
    pub optimizer: OptConfig,
    pub base_seed: u64,
    /// Give every run the same seed (zero-variance sanity check).
    pub identical_seeds: bool,
    /// Scheduling of independent runs.
    pub parallelism: Parallelism,
}

impl Default for CompareSetup {
    fn default() -> Self {
        CompareSetup {
            evaluations: 50,
            optimizer: OptConfig::default(),
            base_seed: 0,
            identical_seeds: false,
            parallelism: Parallelism::Parallel,
        }
    }
}

impl CompareSetup {
    pub fn run_seed(&self, run: usize) -> u64 {
        if self.identical_seeds {
            self.base_seed
        } else {
            self.base_seed
                .wrapping_add((run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        }
    }
}

/// One run of one method.
pub fn run_method(evaluator: &LapTimeEvaluator, method: Method, seed: u64, setup: &CompareSetup) -> Result<ConvergenceCurve> {
    match method {
        Method::Random => random_search(evaluator, setup.evaluations, seed, setup.optimizer.parallelism),
        Method::Ei | Method::Nei => {
            let n_init = setup.optimizer.n_init;
            if setup.evaluations < n_init {
                return Err(Error::validation(format!(
                    "{} evaluations cannot cover {n_init} initial samples",
                    setup.evaluations
                )));
            }
            let config = OptConfig {
                budget: setup.evaluations - n_init,
                acquisition: if method == Method::Ei { Acquisition::Ei } else { Acquisition::Nei },
                rng_seed: seed,
                ..setup.optimizer.clone()
            };
            let result = bayesopt::run(evaluator, &config)?;
            let mut curve = ConvergenceCurve::from_taus(result.state.taus.iter().map(|t| Some(*t)), seed);
            curve.infeasible = result.state.history.iter().filter(|r| r.penalized).count();
            // An early convergence stop holds the final best to the full budget.
            let last = curve.final_best();
            curve.best_so_far.resize(setup.evaluations, last);
            Ok(curve)
        }
    }
}

/// Pointwise mean and 95% band of one method's curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Runs that completed.
    pub n_runs: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub curves: Vec<ConvergenceCurve>,
}

impl MethodSummary {
    fn from_curves(method: Method, curves: Vec<ConvergenceCurve>, evaluations: usize) -> Self {
        let n = curves.len();
        let mut mean = Vec::with_capacity(evaluations);
        let mut lower = Vec::with_capacity(evaluations);
        let mut upper = Vec::with_capacity(evaluations);
        for k in 0..evaluations {
            let (m, half) = mean_band(curves.iter().map(|c| c.best_so_far[k]));
            mean.push(m);
            lower.push(m - half);
            upper.push(m + half);
        }
        MethodSummary {
            method,
            n_runs: n,
            mean,
            lower,
            upper,
            curves,
        }
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().unwrap_or(&f64::NAN)
    }

    pub fn final_band(&self) -> (f64, f64) {
        (
            *self.lower.last().unwrap_or(&f64::NAN),
            *self.upper.last().unwrap_or(&f64::NAN),
        )
    }
}

/// Sample mean and half-width `1.96 * s / sqrt(n)` of the normal-approximation
/// 95% interval of the mean.
pub fn mean_band(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

/// A run that failed and was left out of the statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exclusion {
    pub method: Method,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub evaluations: usize,
    pub n_runs: usize,
    pub methods: Vec<MethodSummary>,
    pub exclusions: Vec<Exclusion>,
}

impl ComparisonReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    /// `method,evaluation,mean_s,lower_s,upper_s,n_runs`, one row per
    /// evaluation and method.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,evaluation,mean_s,lower_s,upper_s,n_runs")?;
        for s in &self.methods {
            for k in 0..s.mean.len() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    s.method,
                    k + 1,
                    s.mean[k],
                    s.lower[k],
                    s.upper[k],
                    s.n_runs
                )?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs every method `n_runs` times with derived seeds and summarizes the
/// best-so-far curves.
pub fn compare(evaluator: &LapTimeEvaluator, methods: &[Method], n_runs: usize, setup: &CompareSetup) -> Result<ComparisonReport> {
    if n_runs < 2 {
        return Err(Error::validation("comparison needs at least 2 runs per method"));
    }
    if methods.is_empty() {
        return Err(Error::validation("no methods to compare"));
    }
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| (0..n_runs).map(move |r| (m, r)))
        .map(|(m, r)| (m, setup.run_seed(r)))
        .collect();
    let results = par::map(setup.parallelism, &jobs, |&(m, seed)| run_method(evaluator, m, seed, setup));

    let mut exclusions = Vec::new();
    let mut summaries = Vec::new();
    for &m in methods {
        let mut curves = Vec::new();
        for ((jm, seed), r) in jobs.iter().zip(&results) {
            if *jm != m {
                continue;
            }
            match r {
                Ok(c) => curves.push(c.clone()),
                Err(e) => {
                    log::warn!("{m} run with seed {seed} failed and is excluded: {e}");
                    exclusions.push(Exclusion {
                        method: m,
                        seed: *seed,
                        message: e.to_string(),
                    });
                }
            }
        }
        summaries.push(MethodSummary::from_curves(m, curves, setup.evaluations));
    }
    Ok(ComparisonReport {
        evaluations: setup.evaluations,
        n_runs,
        methods: summaries,
        exclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::speed::VehicleParams;
    use crate::track::CenterLine;

    fn evaluator() -> LapTimeEvaluator {
        let pts = (0..80)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 80.0;
                Vec2::new(12.0 * a.cos(), 7.0 * a.sin())
            })
            .collect();
        let c = CenterLine::new(pts, vec![2.5], true).unwrap();
        LapTimeEvaluator::for_track(&c, VehicleParams::default(), 6, 60).unwrap()
    }

    #[test]
    fn single_evaluation_curve() {
        let c = random_search(&evaluator(), 1, 3, Parallelism::Sequential).unwrap();
        assert_eq!(c.best_so_far.len(), 1);
    }

    #[test]
    fn random_search_is_deterministic_and_monotone() {
        let ev = evaluator();
        let a = random_search(&ev, 20, 9, Parallelism::Parallel).unwrap();
        let b = random_search(&ev, 20, 9, Parallelism::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.best_so_far.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_draws_count_without_improving() {
        let c = ConvergenceCurve::from_taus([None, Some(3.0), None, Some(4.0), Some(2.0)], 0);
        assert_eq!(c.infeasible, 2);
        assert_eq!(c.best_so_far[1..], [3.0, 3.0, 3.0, 2.0]);
        assert!(c.best_so_far[0].is_infinite());
    }

    #[test]
    fn identical_seeds_give_zero_band() {
        let setup = CompareSetup {
            evaluations: 12,
            identical_seeds: true,
            base_seed: 4,
            ..Default::default()
        };
        let r = compare(&evaluator(), &[Method::Random], 2, &setup).unwrap();
        let s = r.method(Method::Random).unwrap();
        for k in 0..12 {
            assert_eq!(s.lower[k], s.mean[k]);
            assert_eq!(s.upper[k], s.mean[k]);
        }
    }

    #[test]
    fn one_run_is_rejected() {
        assert!(compare(&evaluator(), &[Method::Random], 1, &CompareSetup::default()).is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!("NEI".parse::<Method>().unwrap(), Method::Nei);
        let err = "cma".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("random, ei, nei"));
    }

    #[test]
    fn band_matches_hand_computation() {
        let (m, h) = mean_band([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        let s = (5.0f64 / 3.0).sqrt();
        assert!((h - 1.96 * s / 2.0).abs() < 1e-15);
    }

    #[test]
    fn csv_rows_per_method_and_evaluation() {
        let setup = CompareSetup {
            evaluations: 5,
            ..Default::default()
        };
        let r = compare(&evaluator(), &[Method::Random], 3, &setup).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("method,evaluation,mean_s,lower_s,upper_s,n_runs\nrandom,1,"));
    }
}
