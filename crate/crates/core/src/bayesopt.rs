//! Bayesian optimization of lap time over lateral offsets.
//!
//! The loop starts from uniformly drawn offset vectors, fits a GP from unit-box
//! offsets to lap time, and repeatedly evaluates the candidate that maximizes
//! expected improvement (EI) or its Monte-Carlo noisy variant (NEI) over the
//! box `|w_i| <= w_T(i)/2`.

use crate::error::{Error, Result};
use crate::gp::{Dataset, FitOptions, FittedGP};
use crate::lap::{LapEvaluation, LapTimeEvaluator};
use crate::linalg;
use crate::par::{self, Parallelism};
use crate::qmc;
use crate::track::OffsetVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acquisition {
    Ei,
    Nei,
}

impl std::str::FromStr for Acquisition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(Acquisition::Ei),
            "nei" => Ok(Acquisition::Nei),
            other => Err(Error::validation(format!(
                "unknown acquisition '{other}' (expected ei or nei)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    FixedBudget,
    NoImprovement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Convergence {
    pub mode: ConvergenceMode,
    /// Steps without an improvement of at least `min_delta` before stopping.
    pub patience: usize,
    /// Seconds.
    pub min_delta: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            mode: ConvergenceMode::FixedBudget,
            patience: 15,
            min_delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Random trajectories evaluated before the first GP fit.
    pub n_init: usize,
    /// Maximum number of new observations after initialization.
    pub budget: usize,
    pub acquisition: Acquisition,
    pub nei_fantasies: usize,
    /// Local refinements started from the best candidates.
    pub acq_restarts: usize,
    /// Quasi-random candidates scored per acquisition search.
    pub acq_candidates: usize,
    pub rng_seed: u64,
    pub convergence: Convergence,
    /// Multi-starts of the GP likelihood search.
    pub gp_starts: usize,
    /// One lengthscale per node (ARD) instead of a shared one.
    pub ard: bool,
    /// Share of acquisition candidates drawn around the best observations.
    pub local_fraction: f64,
    pub parallelism: Parallelism,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            n_init: 10,
            budget: 50,
            acquisition: Acquisition::Ei,
            nei_fantasies: 32,
            acq_restarts: 16,
            acq_candidates: 2048,
            rng_seed: 0,
            convergence: Convergence::default(),
            gp_starts: 8,
            ard: false,
            local_fraction: 0.5,
            parallelism: Parallelism::Parallel,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::validation("n_init must be at least 2"));
        }
        if self.nei_fantasies < 8 {
            return Err(Error::validation("nei_fantasies must be at least 8"));
        }
        if self.acq_candidates == 0 || self.acq_restarts == 0 {
            return Err(Error::validation(
                "acq_candidates and acq_restarts must be positive",
            ));
        }
        if self.gp_starts == 0 {
            return Err(Error::validation("gp_starts must be positive"));
        }
        Ok(())
    }

    /// Independent random stream for initialization (`step == 0`) and for
    /// each optimization step.
    fn rng(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(step);
        rng
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `E[max(tau_best - Y, 0)]` for `Y ~ N(mean, variance)`.
pub fn expected_improvement(mean: f64, variance: f64, tau_best: f64) -> f64 {
    let gain = tau_best - mean;
    if !(variance > 0.0) {
        return gain.max(0.0);
    }
    let sd = variance.sqrt();
    let z = gain / sd;
    (gain * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

/// Fantasy samples for noisy expected improvement.
///
/// Each fantasy is a joint posterior draw of the latent lap times at the
/// observed inputs. The query is scored by EI under the noise-free GP
/// conditioned on that draw, against the draw's own best value, and the
/// scores are averaged.
#[derive(Debug, Clone)]
pub struct NeiFantasies {
    n: usize,
    /// Cholesky factor of the latent Gram matrix plus jitter.
    chol: Vec<f64>,
    /// Per fantasy, `K^-1 f_s` in standardized units.
    weights: Vec<Vec<f64>>,
    /// Per fantasy, the smallest sampled value.
    bests: Vec<f64>,
}

impl NeiFantasies {
    pub fn sample<R: Rng>(model: &FittedGP, count: usize, rng: &mut R) -> Result<Self> {
        let n = model.dataset().len();
        let h = model.hyperparams();
        let latent = model.latent_gram();
        let chol_y = model.cholesky_factor();
        let alpha = linalg::cholesky_solve(chol_y, n, model.standardized_outputs());

        // Posterior of the latent values at the inputs.
        let mut mean = vec![h.prior_mean; n];
        for i in 0..n {
            mean[i] += (0..n).map(|j| latent[i * n + j] * alpha[j]).sum::<f64>();
        }
        let mut v = vec![0.0; n * n]; // column j = L^-1 K_f e_j
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| latent[i * n + j]).collect();
            let s = linalg::solve_lower(chol_y, n, &col);
            for i in 0..n {
                v[i * n + j] = s[i];
            }
        }
        let mut cov = latent.clone();
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] -= (0..n).map(|m| v[m * n + i] * v[m * n + j]).sum::<f64>();
            }
        }
        let root = linalg::cholesky_psd(&cov, n, 1e-14 * h.signal_variance);

        let mut jitter = crate::gp::JITTER;
        let chol = loop {
            let mut k = latent.clone();
            for i in 0..n {
                k[i * n + i] += jitter * h.signal_variance;
            }
            if let Some(l) = linalg::cholesky(&k, n) {
                break l;
            }
            jitter *= 10.0;
            if jitter > crate::gp::MAX_JITTER * 1.0001 {
                return Err(Error::Numerical(
                    "latent Gram matrix not positive definite for NEI fantasies".into(),
                ));
            }
        };

        let mut weights = Vec::with_capacity(count);
        let mut bests = Vec::with_capacity(count);
        for _ in 0..count {
            let z: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
            let f: Vec<f64> = (0..n)
                .map(|i| mean[i] + (0..=i).map(|j| root[i * n + j] * z[j]).sum::<f64>())
                .collect();
            bests.push(f.iter().cloned().fold(f64::INFINITY, f64::min));
            let centered: Vec<f64> = f.iter().map(|v| v - h.prior_mean).collect();
            weights.push(linalg::cholesky_solve(&chol, n, &centered));
        }
        Ok(NeiFantasies {
            n,
            chol,
            weights,
            bests,
        })
    }

    /// NEI of a unit-box query, in original output units.
    pub fn value(&self, model: &FittedGP, x: &[f64]) -> f64 {
        let Ok(ks) = model.cross_covariance(x) else {
            return 0.0;
        };
        let h = model.hyperparams();
        let v = linalg::solve_lower(&self.chol, self.n, &ks);
        let var = (h.signal_variance - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        let total: f64 = self
            .weights
            .iter()
            .zip(&self.bests)
            .map(|(w, best)| {
                let mean = h.prior_mean + ks.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                expected_improvement(mean, var, *best)
            })
            .sum();
        model.output_scale() * total / self.weights.len() as f64
    }
}

/// Box-Muller standard normal draw.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// An acquisition function bound to a fitted model.
#[derive(Debug, Clone)]
pub enum AcquisitionFn {
    Ei { tau_best: f64 },
    Nei(NeiFantasies),
}

impl AcquisitionFn {
    pub fn build<R: Rng>(model: &FittedGP, kind: Acquisition, tau_best: f64, config: &OptConfig, rng: &mut R) -> Result<Self> {
        Ok(match kind {
            Acquisition::Ei => AcquisitionFn::Ei { tau_best },
            Acquisition::Nei => AcquisitionFn::Nei(NeiFantasies::sample(model, config.nei_fantasies, rng)?),
        })
    }

    /// Acquisition value at unit-box coordinates `x`, seconds.
    pub fn value(&self, model: &FittedGP, x: &[f64]) -> f64 {
        match self {
            AcquisitionFn::Ei { tau_best } => match model.predict(x) {
                Ok((m, v)) => expected_improvement(m, v, *tau_best),
                Err(_) => 0.0,
            },
            AcquisitionFn::Nei(f) => f.value(model, x),
        }
    }
}

/// NEI of `query` (metres) with fantasies drawn from `config.rng_seed`.
pub fn noisy_expected_improvement(model: &FittedGP, evaluator: &LapTimeEvaluator, query: &OffsetVector, config: &OptConfig) -> Result<f64> {
    let mut rng = config.rng(0);
    let fantasies = NeiFantasies::sample(model, config.nei_fantasies, &mut rng)?;
    Ok(fantasies.value(model, &evaluator.to_unit(query)))
}

/// Largest step of the coordinate pattern search, unit-box coordinates.
const PATTERN_STEP: f64 = 0.25;
const PATTERN_MIN_STEP: f64 = 1e-7;

/// Proposals stay this far inside the unit box.
const EDGE: f64 = 1.0 - 1e-9;

fn clamp_unit(v: f64) -> f64 {
    v.clamp(-EDGE, EDGE)
}

/// Coordinate pattern search inside the open unit box, maximizing `f`.
fn pattern_search<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], f0: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut best = f0;
    let mut step = PATTERN_STEP;
    let max_evals = 400 * n.max(1);
    let mut evals = 0;
    while step >= PATTERN_MIN_STEP && evals < max_evals {
        let mut improved = false;
        for i in 0..n {
            for dir in [1.0, -1.0] {
                let xi = clamp_unit(x[i] + dir * step);
                if xi == x[i] {
                    continue;
                }
                let old = x[i];
                x[i] = xi;
                let v = f(&x);
                evals += 1;
                if v > best {
                    best = v;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

/// Chance that a local candidate perturbs a given coordinate; one
/// coordinate is always moved.
const LOCAL_MOVE_PROBABILITY: f64 = 0.2;

/// Maximizes an acquisition function over the interior of `[-1, 1]^dim`.
///
/// Candidates are shifted Halton points plus Gaussian perturbations of the
/// `anchors` (typically the best observed inputs); the top
/// `config.acq_restarts` candidates are refined by a coordinate pattern
/// search. Returns the best point and its value.
pub fn maximize_unit<R: Rng>(
    model: &FittedGP,
    acq: &AcquisitionFn,
    dim: usize,
    anchors: &[Vec<f64>],
    config: &OptConfig,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let n_local = if anchors.is_empty() {
        0
    } else {
        (config.acq_candidates as f64 * config.local_fraction.clamp(0.0, 1.0)) as usize
    };
    let n_global = config.acq_candidates - n_local;
    let mut candidates: Vec<Vec<f64>> = qmc::shifted_halton(n_global, dim, rng)
        .into_iter()
        .map(|u| u.into_iter().map(|v| clamp_unit(2.0 * v - 1.0)).collect())
        .collect();
    candidates.extend(anchors.iter().map(|a| a.iter().map(|v| clamp_unit(*v)).collect::<Vec<_>>()));
    // Perturb a few coordinates at a time so local candidates stay close to
    // the anchor along the dimensions the model knows little about.
    let p_move = LOCAL_MOVE_PROBABILITY;
    for k in 0..n_local {
        let anchor = &anchors[k % anchors.len()];
        let sigma = if k % 2 == 0 { 0.05 } else { 0.2 };
        let forced = rng.gen_range(0..dim);
        candidates.push(
            anchor
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if i == forced || rng.gen::<f64>() < p_move {
                        clamp_unit(v + sigma * standard_normal(rng))
                    } else {
                        clamp_unit(*v)
                    }
                })
                .collect(),
        );
    }
    let f = |x: &[f64]| acq.value(model, x);
    let scores = par::map(config.parallelism, &candidates, |x| f(x));
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let starts: Vec<usize> = order.into_iter().take(config.acq_restarts).collect();
    let refined = par::map(config.parallelism, &starts, |&i| {
        pattern_search(&f, &candidates[i], scores[i])
    });
    refined
        .into_iter()
        .enumerate()
        .fold(None::<(Vec<f64>, f64)>, |best, (_, (x, v))| match best {
            Some(b) if b.1 >= v => Some(b),
            _ => Some((x, v)),
        })
        .unwrap_or_else(|| (vec![0.0; dim], 0.0))
}

/// Maximizes `acq` over the box `|w_i| <= half_widths[i]`.
pub fn maximize_acquisition(
    model: &FittedGP,
    acq: &AcquisitionFn,
    half_widths: &[f64],
    config: &OptConfig,
) -> Result<(OffsetVector, f64)> {
    if half_widths.len() != model.dim() {
        return Err(Error::validation(format!(
            "{} bounds for a {}-dimensional model",
            half_widths.len(),
            model.dim()
        )));
    }
    let mut rng = config.rng(u64::MAX);
    let anchors = best_inputs(model.dataset(), 5);
    let (u, v) = maximize_unit(model, acq, half_widths.len(), &anchors, config, &mut rng);
    Ok((
        OffsetVector(u.iter().zip(half_widths).map(|(a, h)| a * h).collect()),
        v,
    ))
}

/// Inputs of the `k` smallest outputs.
fn best_inputs(data: &Dataset, k: usize) -> Vec<Vec<f64>> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| data.outputs[a].total_cmp(&data.outputs[b]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| data.inputs[i].clone()).collect()
}

/// One step of the optimization loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based step index after initialization.
    pub iteration: usize,
    pub offsets: OffsetVector,
    pub tau: f64,
    pub tau_best: f64,
    pub acquisition_value: f64,
    /// The proposal could not be evaluated and was given a penalty lap time.
    pub penalized: bool,
}

#[derive(Debug, Clone)]
pub struct OptState {
    /// Every evaluated offset vector, in evaluation order.
    pub offsets: Vec<OffsetVector>,
    /// Lap time of each evaluated vector (penalty value when infeasible).
    pub taus: Vec<f64>,
    pub model: FittedGP,
    pub tau_best: f64,
    pub w_best: OffsetVector,
    pub history: Vec<IterationRecord>,
    pub n_init: usize,
}

impl OptState {
    /// Running minimum of the lap time after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.taus
            .iter()
            .map(|t| {
                best = best.min(*t);
                best
            })
            .collect()
    }

    /// Writes `iter,tau_s,tau_best_s,w_0..w_{n-1}`, one row per evaluation
    /// (initialization included; `iter` counts evaluations from 1).
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.w_best.len();
        let mut header = String::from("iter,tau_s,tau_best_s");
        for i in 0..n {
            header.push_str(&format!(",w_{i}"));
        }
        writeln!(out, "{header}")?;
        for (k, (w, (tau, best))) in self
            .offsets
            .iter()
            .zip(self.taus.iter().zip(self.best_so_far()))
            .enumerate()
        {
            write!(out, "{},{},{}", k + 1, tau, best)?;
            for v in &w.0 {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn fit_model(evaluator: &LapTimeEvaluator, offsets: &[OffsetVector], taus: &[f64], warm: Option<&FittedGP>, config: &OptConfig) -> Result<FittedGP> {
    let inputs = offsets.iter().map(|w| evaluator.to_unit(w)).collect();
    let data = Dataset::new(inputs, taus.to_vec())?;
    let opts = FitOptions {
        n_starts: config.gp_starts,
        warm_start: warm.map(|m| m.hyperparams().clone()),
        ard: config.ard,
        parallelism: config.parallelism,
        ..Default::default()
    };
    FittedGP::fit_with(data, &opts)
}

/// Number of redraws allowed for an infeasible initial sample.
pub const INIT_RETRIES: usize = 5;

/// Draws and evaluates `config.n_init` random trajectories and fits the GP.
pub fn initialize(evaluator: &LapTimeEvaluator, config: &OptConfig) -> Result<OptState> {
    config.validate()?;
    let mut rng = config.rng(0);
    let draws: Vec<OffsetVector> = (0..config.n_init)
        .map(|_| evaluator.random_offsets(&mut rng))
        .collect();
    let first = par::map(config.parallelism, &draws, |w| evaluator.lap_time(w).ok());
    let infeasible = first.iter().filter(|t| t.is_none()).count();
    if 2 * infeasible > config.n_init {
        return Err(Error::Initialization(format!(
            "{infeasible} of {} initial trajectories infeasible; try fewer nodes or narrower bounds",
            config.n_init
        )));
    }
    let mut offsets = Vec::with_capacity(config.n_init);
    let mut taus = Vec::with_capacity(config.n_init);
    for (w, t) in draws.into_iter().zip(first) {
        let (w, t) = match t {
            Some(t) => (w, t),
            None => {
                let mut found = None;
                for _ in 0..INIT_RETRIES {
                    let w = evaluator.random_offsets(&mut rng);
                    if let Ok(t) = evaluator.lap_time(&w) {
                        found = Some((w, t));
                        break;
                    }
                }
                found.ok_or_else(|| {
                    Error::Initialization(format!(
                        "no feasible trajectory after {INIT_RETRIES} redraws; try fewer nodes or narrower bounds"
                    ))
                })?
            }
        };
        offsets.push(w);
        taus.push(t);
    }
    let model = fit_model(evaluator, &offsets, &taus, None, config)?;
    let (best_idx, tau_best) = argmin(&taus);
    Ok(OptState {
        w_best: offsets[best_idx].clone(),
        offsets,
        taus,
        model,
        tau_best,
        history: Vec::new(),
        n_init: config.n_init,
    })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) })
}

/// Proposes, evaluates and records one new trajectory, then refits the GP.
pub fn step(evaluator: &LapTimeEvaluator, mut state: OptState, config: &OptConfig) -> Result<OptState> {
    let iteration = state.history.len() + 1;
    let mut rng = config.rng(iteration as u64);
    let acq = AcquisitionFn::build(&state.model, config.acquisition, state.tau_best, config, &mut rng)?;
    let anchors = best_inputs(state.model.dataset(), 5);
    let (u, acq_value) = maximize_unit(&state.model, &acq, evaluator.dim(), &anchors, config, &mut rng);
    let w = evaluator.from_unit(&u);
    let (tau, penalized) = match evaluator.lap_time(&w) {
        Ok(t) => (t, false),
        Err(e) => {
            let worst = state.taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            log::warn!("proposal {iteration} infeasible ({e}); penalized");
            (2.0 * worst, true)
        }
    };
    state.offsets.push(w.clone());
    state.taus.push(tau);
    if tau < state.tau_best {
        state.tau_best = tau;
        state.w_best = w.clone();
    }
    state.model = fit_model(evaluator, &state.offsets, &state.taus, Some(&state.model), config)?;
    state.history.push(IterationRecord {
        iteration,
        offsets: w,
        tau,
        tau_best: state.tau_best,
        acquisition_value: acq_value,
        penalized,
    });
    Ok(state)
}

fn converged(state: &OptState, config: &OptConfig) -> bool {
    let c = &config.convergence;
    if c.mode != ConvergenceMode::NoImprovement || state.history.len() < c.patience.max(1) {
        return false;
    }
    let h = &state.history;
    let before = if h.len() > c.patience {
        h[h.len() - c.patience - 1].tau_best
    } else {
        state.taus[..state.n_init].iter().cloned().fold(f64::INFINITY, f64::min)
    };
    before - state.tau_best < c.min_delta
}

/// Result of a full optimization run.
#[derive(Debug, Clone)]
pub struct RaceLine {
    pub state: OptState,
    /// The best trajectory, re-evaluated from its offsets.
    pub best: LapEvaluation,
}

impl RaceLine {
    pub fn w_best(&self) -> &OffsetVector {
        &self.state.w_best
    }

    pub fn lap_time(&self) -> f64 {
        self.best.lap_time()
    }
}

/// Initialization followed by optimization steps until the budget is spent
/// or the convergence rule fires.
pub fn run(evaluator: &LapTimeEvaluator, config: &OptConfig) -> Result<RaceLine> {
    run_with_observer(evaluator, config, |_| {})
}

/// Like [`run`], calling `observe` after initialization and after each step.
pub fn run_with_observer<F: FnMut(&OptState)>(evaluator: &LapTimeEvaluator, config: &OptConfig, mut observe: F) -> Result<RaceLine> {
    let mut state = initialize(evaluator, config)?;
    observe(&state);
    for _ in 0..config.budget {
        if converged(&state, config) {
            break;
        }
        state = step(evaluator, state, config)?;
        observe(&state);
    }
    let best = evaluator.evaluate_full(&state.w_best)?;
    Ok(RaceLine { state, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::speed::VehicleParams;
    use crate::track::CenterLine;
    use std::f64::consts::PI;

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement(5.0, 0.0, 6.0), 1.0);
        assert_eq!(expected_improvement(7.0, 0.0, 6.0), 0.0);
        assert!((expected_improvement(3.0, 1.0, 3.0) - INV_SQRT_2PI).abs() < 1e-15);
        assert!((expected_improvement(3.0, 1.0, 3.0) - 0.39894).abs() < 1e-5);
        assert!(expected_improvement(100.0, 1.0, 0.0) >= 0.0);
    }

    #[test]
    fn acquisition_parses() {
        assert_eq!("EI".parse::<Acquisition>().unwrap(), Acquisition::Ei);
        assert_eq!("nei".parse::<Acquisition>().unwrap(), Acquisition::Nei);
        assert!("ucb".parse::<Acquisition>().is_err());
    }

    #[test]
    fn config_validation() {
        let c = OptConfig { n_init: 1, ..Default::default() };
        assert!(c.validate().is_err());
        let c = OptConfig { nei_fantasies: 4, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn pattern_search_finds_quadratic_peak() {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - (x[1] + 0.7).powi(2);
        let (x, v) = pattern_search(&f, &[0.9, 0.9], f(&[0.9, 0.9]));
        assert!((x[0] - 0.3).abs() < 1e-6 && (x[1] + 0.7).abs() < 1e-6);
        assert!(v > -1e-12);
    }

    fn ring_evaluator(width: f64) -> LapTimeEvaluator {
        let pts = (0..120)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 120.0;
                Vec2::new(10.0 * a.cos(), 10.0 * a.sin())
            })
            .collect();
        let c = CenterLine::new(pts, vec![width], true).unwrap();
        LapTimeEvaluator::for_track(&c, VehicleParams::default(), 6, 60).unwrap()
    }

    fn small_config(seed: u64) -> OptConfig {
        OptConfig {
            n_init: 5,
            budget: 3,
            acq_candidates: 256,
            acq_restarts: 4,
            rng_seed: seed,
            ..Default::default()
        }
    }

    #[test]
    fn step_bookkeeping() {
        let ev = ring_evaluator(3.0);
        let cfg = small_config(7);
        let s0 = initialize(&ev, &cfg).unwrap();
        assert_eq!(s0.taus.len(), 5);
        assert_eq!(s0.tau_best, s0.taus.iter().cloned().fold(f64::INFINITY, f64::min));
        let before = s0.tau_best;
        let s1 = step(&ev, s0, &cfg).unwrap();
        assert_eq!(s1.taus.len(), 6);
        assert_eq!(s1.history.len(), 1);
        assert!(s1.tau_best <= before);
        assert!(s1.history[0].offsets.check_bounds(&ev.nodes).is_ok());
    }

    #[test]
    fn zero_budget_returns_initial_best() {
        let ev = ring_evaluator(3.0);
        let cfg = OptConfig { budget: 0, ..small_config(3) };
        let r = run(&ev, &cfg).unwrap();
        assert!(r.state.history.is_empty());
        assert_eq!(r.lap_time(), r.state.tau_best);
    }

    #[test]
    fn history_csv_layout() {
        let ev = ring_evaluator(3.0);
        let r = run(&ev, &small_config(1)).unwrap();
        let mut buf = Vec::new();
        r.state.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,tau_s,tau_best_s,w_0,w_1,w_2,w_3,w_4,w_5"
        );
        assert_eq!(lines.count(), 8);
    }
}
