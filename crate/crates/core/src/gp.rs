//! Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! Outputs are standardized to zero mean and unit variance before fitting;
//! the kernel hyperparameters live in that standardized space and
//! predictions are mapped back to the original units. Hyperparameters are
//! chosen by maximizing the log marginal likelihood with a multi-start,
//! box-constrained quasi-Newton search in log space.

use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{self, BoxOptions};
use crate::par::{self, Parallelism};
use crate::qmc;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (0.05, 10.0);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (0.01, 100.0);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (1e-8, 0.1);

/// Diagonal jitter relative to the signal variance, always added.
pub const JITTER: f64 = 1e-12;
/// Largest relative jitter tried when a factorization fails.
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// One lengthscale per input dimension (ARD) or a single shared one.
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    /// Observation noise variance on top of the jitter floor.
    pub noise_variance: f64,
    /// Constant prior mean.
    pub prior_mean: f64,
}

impl Hyperparams {
    pub fn ard(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Hyperparams {
            lengthscales: vec![lengthscale; dim],
            signal_variance,
            noise_variance,
            prior_mean: 0.0,
        }
    }

    pub fn isotropic(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self::ard(1, lengthscale, signal_variance, noise_variance)
    }

    /// Jitter floor `JITTER * signal_variance` on the Gram diagonal.
    pub fn noise_floor(&self) -> f64 {
        JITTER * self.signal_variance
    }

    /// Total diagonal term for training points.
    pub fn effective_noise(&self) -> f64 {
        self.noise_variance + self.noise_floor()
    }

    fn lengthscale(&self, d: usize) -> f64 {
        if self.lengthscales.len() == 1 {
            self.lengthscales[0]
        } else {
            self.lengthscales[d]
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let n = self.lengthscales.len();
        if n != 1 && n != dim {
            return Err(Error::validation(format!(
                "{n} lengthscales for {dim}-dimensional inputs"
            )));
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::validation("lengthscales must be positive"));
        }
        if !(self.signal_variance > 0.0) {
            return Err(Error::validation("signal variance must be positive"));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::validation("noise variance must be non-negative"));
        }
        Ok(())
    }

    /// Log-space parameter vector: log lengthscales, log signal variance,
    /// log noise variance.
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.max(f64::MIN_POSITIVE).ln());
        v
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let p = theta.len() - 2;
        Hyperparams {
            lengthscales: theta[..p].iter().map(|v| v.exp()).collect(),
            signal_variance: theta[p].exp(),
            noise_variance: theta[p + 1].exp(),
            prior_mean: 0.0,
        }
    }
}

fn sq_exp(a: &[f64], b: &[f64], h: &Hyperparams) -> f64 {
    let mut r2 = 0.0;
    for d in 0..a.len() {
        let z = (a[d] - b[d]) / h.lengthscale(d);
        r2 += z * z;
    }
    h.signal_variance * (-0.5 * r2).exp()
}

/// Latent squared-exponential covariance between two distinct points:
/// `signal_variance * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2)`.
pub fn kernel_eval(a: &[f64], b: &[f64], h: &Hyperparams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    h.check(a.len())?;
    Ok(sq_exp(a, b, h))
}

/// Training covariance: the latent kernel plus observation noise when `a`
/// and `b` are the same training point.
pub fn kernel_eval_training(a: &[f64], b: &[f64], h: &Hyperparams, same_point: bool) -> Result<f64> {
    let k = kernel_eval(a, b, h)?;
    Ok(if same_point { k + h.effective_noise() } else { k })
}

/// Training inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        let d = Dataset { inputs, outputs };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::validation("dataset is empty"));
        }
        if self.inputs.len() != self.outputs.len() {
            return Err(Error::validation("inputs and outputs differ in length"));
        }
        let dim = self.inputs[0].len();
        if dim == 0 || self.inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::validation("inputs must share a non-zero dimension"));
        }
        if self.inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("inputs must be finite"));
        }
        if self.outputs.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
            return Err(Error::validation("outputs must be finite and positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub n_starts: usize,
    pub max_iters: usize,
    /// Previous optimum, used as the first start.
    pub warm_start: Option<Hyperparams>,
    /// One lengthscale per dimension when true, a shared one otherwise.
    pub ard: bool,
    pub parallelism: Parallelism,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 8,
            max_iters: 200,
            warm_start: None,
            ard: true,
            parallelism: Parallelism::Parallel,
        }
    }
}

/// A GP conditioned on a dataset, with the factorized Gram matrix cached.
#[derive(Debug, Clone)]
pub struct FittedGP {
    dataset: Dataset,
    /// Kernel hyperparameters in standardized output units.
    hyperparams: Hyperparams,
    y_mean: f64,
    y_scale: f64,
    /// Standardized outputs.
    y_std: Vec<f64>,
    /// Relative jitter actually used in the factorization.
    jitter: f64,
    /// Lower Cholesky factor of the Gram matrix.
    chol: Vec<f64>,
    /// `K^-1 (y - prior_mean)` in standardized units.
    alpha: Vec<f64>,
}

/// Serializable model snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDump {
    pub hyperparams: Hyperparams,
    pub output_mean: f64,
    pub output_scale: f64,
    pub dataset: Dataset,
}

fn standardize(y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
    (mean, scale, y.iter().map(|v| (v - mean) / scale).collect())
}

/// Per-dimension squared differences between all training input pairs.
struct PairDistances {
    n: usize,
    /// `sq[d][i * n + j]`
    sq: Vec<Vec<f64>>,
}

impl PairDistances {
    fn new(inputs: &[Vec<f64>]) -> Self {
        let n = inputs.len();
        let dim = inputs[0].len();
        let sq = (0..dim)
            .map(|d| {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        let v = (inputs[i][d] - inputs[j][d]).powi(2);
                        m[i * n + j] = v;
                        m[j * n + i] = v;
                    }
                }
                m
            })
            .collect();
        PairDistances { n, sq }
    }

    fn latent_gram(&self, h: &Hyperparams) -> Vec<f64> {
        let n = self.n;
        let mut r2 = vec![0.0; n * n];
        for (d, sq) in self.sq.iter().enumerate() {
            let inv = 1.0 / h.lengthscale(d).powi(2);
            for (r, s) in r2.iter_mut().zip(sq) {
                *r += s * inv;
            }
        }
        r2.iter()
            .map(|r| h.signal_variance * (-0.5 * r).exp())
            .collect()
    }
}

/// Log marginal likelihood of standardized outputs and its gradient with
/// respect to the log parameters. `None` when the Gram matrix is not
/// positive definite.
fn log_likelihood(pairs: &PairDistances, y: &[f64], theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = pairs.n;
    let h = Hyperparams::from_log(theta);
    let se = pairs.latent_gram(&h);
    let mut k = se.clone();
    let diag = h.effective_noise();
    for i in 0..n {
        k[i * n + i] += diag;
    }
    let l = linalg::cholesky(&k, n)?;
    let alpha = linalg::cholesky_solve(&l, n, y);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let logdet: f64 = (0..n).map(|i| l[i * n + i].ln()).sum();
    let value = -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * PI).ln();

    let kinv = linalg::cholesky_inverse(&l, n);
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = alpha[i] * alpha[j] - kinv[i * n + j];
        }
    }
    let p = theta.len() - 2;
    let mut grad = vec![0.0; theta.len()];
    let ws: Vec<f64> = w.iter().zip(&se).map(|(a, b)| a * b).collect();
    if p == 1 {
        let inv = 1.0 / h.lengthscales[0].powi(2);
        let mut acc = 0.0;
        for sq in &pairs.sq {
            acc += ws.iter().zip(sq).map(|(a, b)| a * b).sum::<f64>();
        }
        grad[0] = 0.5 * acc * inv;
    } else {
        for (d, sq) in pairs.sq.iter().enumerate() {
            let inv = 1.0 / h.lengthscales[d].powi(2);
            grad[d] = 0.5 * inv * ws.iter().zip(sq).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let trace_w: f64 = (0..n).map(|i| w[i * n + i]).sum();
    grad[p] = 0.5 * (ws.iter().sum::<f64>() + trace_w * h.noise_floor());
    grad[p + 1] = 0.5 * trace_w * h.noise_variance;
    Some((value, grad))
}

/// Log-space box for the fitted parameters.
pub fn log_param_bounds(n_lengthscales: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![LENGTHSCALE_BOUNDS.0.ln(); n_lengthscales];
    let mut hi = vec![LENGTHSCALE_BOUNDS.1.ln(); n_lengthscales];
    lo.push(SIGNAL_VARIANCE_BOUNDS.0.ln());
    hi.push(SIGNAL_VARIANCE_BOUNDS.1.ln());
    lo.push(NOISE_VARIANCE_BOUNDS.0.ln());
    hi.push(NOISE_VARIANCE_BOUNDS.1.ln());
    (lo, hi)
}

/// Deterministic multi-start design in log space.
fn start_points(n_lengthscales: usize, opts: &FitOptions) -> Vec<Vec<f64>> {
    let mut starts = Vec::with_capacity(opts.n_starts.max(1));
    if let Some(ws) = &opts.warm_start {
        if ws.lengthscales.len() == n_lengthscales {
            starts.push(ws.to_log());
        }
    }
    // Spread a shared lengthscale, the signal variance and the noise over
    // moderate ranges.
    let design = qmc::halton(opts.n_starts.max(1), 3);
    for u in design {
        if starts.len() >= opts.n_starts.max(1) {
            break;
        }
        let ln_l = (0.2f64).ln() + u[0] * ((5.0f64).ln() - (0.2f64).ln());
        let ln_s = (0.3f64).ln() + u[1] * ((3.0f64).ln() - (0.3f64).ln());
        let ln_n = (1e-6f64).ln() + u[2] * ((1e-2f64).ln() - (1e-6f64).ln());
        let mut v = vec![ln_l; n_lengthscales];
        v.push(ln_s);
        v.push(ln_n);
        starts.push(v);
    }
    starts
}

impl FittedGP {
    /// Fits hyperparameters by marginal likelihood with default options.
    pub fn fit(data: Dataset) -> Result<Self> {
        Self::fit_with(data, &FitOptions::default())
    }

    pub fn fit_with(data: Dataset, opts: &FitOptions) -> Result<Self> {
        data.validate()?;
        let dim = data.dim();
        let (y_mean, y_scale, y_std) = standardize(&data.outputs);
        let n_ls = if opts.ard { dim } else { 1 };
        if data.len() < 2 {
            let h = opts
                .warm_start
                .clone()
                .filter(|h| h.lengthscales.len() == n_ls)
                .unwrap_or_else(|| Hyperparams::ard(n_ls, 1.0, 1.0, 1e-6));
            return Self::assemble(data, h, y_mean, y_scale, y_std);
        }
        let pairs = PairDistances::new(&data.inputs);
        let (lo, hi) = log_param_bounds(n_ls);
        let box_opts = BoxOptions {
            max_iters: opts.max_iters,
            gtol: 1e-7,
            ..Default::default()
        };
        let starts = start_points(n_ls, opts);
        let results = par::map(opts.parallelism, &starts, |x0| {
            optim::minimize_box(
                |theta| log_likelihood(&pairs, &y_std, theta).map(|(v, g)| (-v, g.iter().map(|x| -x).collect())),
                x0,
                &lo,
                &hi,
                &box_opts,
            )
        });
        let best = results
            .into_iter()
            .flatten()
            .filter(|r| r.value.is_finite())
            .fold(None::<optim::BoxResult>, |best, r| match best {
                Some(b) if b.value <= r.value => Some(b),
                _ => Some(r),
            })
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "marginal likelihood could not be evaluated from any of {} starts \
                     (Gram matrix not positive definite)",
                    starts.len()
                ))
            })?;
        log::debug!("GP likelihood search: best start took {} iterations", best.iterations);
        let h = Hyperparams::from_log(&best.x);
        Self::assemble(data, h, y_mean, y_scale, y_std)
    }

    /// Conditions on `data` with fixed hyperparameters given in standardized
    /// output units.
    pub fn with_hyperparams(data: Dataset, hyperparams: Hyperparams) -> Result<Self> {
        data.validate()?;
        hyperparams.check(data.dim())?;
        let (y_mean, y_scale, y_std) = standardize(&data.outputs);
        Self::assemble(data, hyperparams, y_mean, y_scale, y_std)
    }

    pub fn from_dump(dump: ModelDump) -> Result<Self> {
        dump.dataset.validate()?;
        dump.hyperparams.check(dump.dataset.dim())?;
        let y_std = dump
            .dataset
            .outputs
            .iter()
            .map(|v| (v - dump.output_mean) / dump.output_scale)
            .collect();
        Self::assemble(
            dump.dataset,
            dump.hyperparams,
            dump.output_mean,
            dump.output_scale,
            y_std,
        )
    }

    fn assemble(data: Dataset, mut h: Hyperparams, y_mean: f64, y_scale: f64, y_std: Vec<f64>) -> Result<Self> {
        h.prior_mean = 0.0;
        let n = data.len();
        let pairs = PairDistances::new(&data.inputs);
        let se = pairs.latent_gram(&h);
        let mut jitter = JITTER;
        loop {
            let mut k = se.clone();
            let diag = h.noise_variance + jitter * h.signal_variance;
            for i in 0..n {
                k[i * n + i] += diag;
            }
            if let Some(chol) = linalg::cholesky(&k, n) {
                let centered: Vec<f64> = y_std.iter().map(|v| v - h.prior_mean).collect();
                let alpha = linalg::cholesky_solve(&chol, n, &centered);
                return Ok(FittedGP {
                    dataset: data,
                    hyperparams: h,
                    y_mean,
                    y_scale,
                    y_std,
                    jitter,
                    chol,
                    alpha,
                });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * 1.0001 {
                let diag_min = (0..n).map(|i| k[i * n + i]).fold(f64::INFINITY, f64::min);
                return Err(Error::Numerical(format!(
                    "Gram matrix of {n} points not positive definite even with relative \
                     jitter {MAX_JITTER:e} (smallest diagonal {diag_min:e}); inputs are likely duplicated"
                )));
            }
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Hyperparameters in standardized output units.
    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    /// Prior mean in original output units.
    pub fn prior_mean(&self) -> f64 {
        self.y_mean + self.y_scale * self.hyperparams.prior_mean
    }

    /// Prior latent variance in original output units.
    pub fn prior_variance(&self) -> f64 {
        self.y_scale * self.y_scale * self.hyperparams.signal_variance
    }

    pub fn output_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn output_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Total noise on the Gram diagonal, standardized units.
    pub fn diagonal_noise(&self) -> f64 {
        self.hyperparams.noise_variance + self.jitter * self.hyperparams.signal_variance
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    /// `||L L^T - K||_inf / ||K||_inf` for the cached factor.
    pub fn factorization_residual(&self) -> f64 {
        let n = self.dataset.len();
        let k = self.gram();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..n {
            let mut row_err = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                let mut s = 0.0;
                for m in 0..=i.min(j) {
                    s += self.chol[i * n + m] * self.chol[j * n + m];
                }
                row_err += (s - k[i * n + j]).abs();
                row += k[i * n + j].abs();
            }
            num = num.max(row_err);
            den = den.max(row);
        }
        num / den
    }

    /// Gram matrix with the diagonal noise, standardized units.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.dataset.len();
        let mut k = self.latent_gram();
        for i in 0..n {
            k[i * n + i] += self.diagonal_noise();
        }
        k
    }

    /// Noise-free covariance between training inputs, standardized units.
    pub fn latent_gram(&self) -> Vec<f64> {
        PairDistances::new(&self.dataset.inputs).latent_gram(&self.hyperparams)
    }

    /// Standardized outputs.
    pub fn standardized_outputs(&self) -> &[f64] {
        &self.y_std
    }

    /// Lower Cholesky factor of [`FittedGP::gram`].
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// Covariance between a query and every training input, standardized.
    pub fn cross_covariance(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::validation(format!(
                "query has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self
            .dataset
            .inputs
            .iter()
            .map(|xi| sq_exp(x, xi, &self.hyperparams))
            .collect())
    }

    /// Posterior mean and latent variance in standardized units.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<(f64, f64)> {
        let ks = self.cross_covariance(x)?;
        let n = self.dataset.len();
        let mean = self.hyperparams.prior_mean + ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = linalg::solve_lower(&self.chol, n, &ks);
        let raw = self.hyperparams.signal_variance - v.iter().map(|x| x * x).sum::<f64>();
        if raw < -1e-8 * self.hyperparams.signal_variance {
            log::warn!("posterior variance {raw:e} clamped to zero");
        }
        Ok((mean, raw.max(0.0)))
    }

    /// Posterior mean and variance of the latent function at `x`, in
    /// original output units. Observation noise is not included in the
    /// variance.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (m, v) = self.predict_standardized(x)?;
        Ok((self.y_mean + self.y_scale * m, self.y_scale * self.y_scale * v))
    }

    /// Log marginal likelihood and gradient at log parameters `theta`
    /// (layout of [`Hyperparams::to_log`]) for this model's data.
    pub fn log_likelihood_at(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let pairs = PairDistances::new(&self.dataset.inputs);
        log_likelihood(&pairs, &self.y_std, theta)
    }

    /// Log marginal likelihood at the fitted hyperparameters.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood_at(&self.hyperparams.to_log())
            .map(|(v, _)| v)
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn dump(&self) -> ModelDump {
        ModelDump {
            hyperparams: self.hyperparams.clone(),
            output_mean: self.y_mean,
            output_scale: self.y_scale,
            dataset: self.dataset.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.dump()).expect("model dump serializes")
    }
}

/// Max-norm of the log-likelihood gradient over coordinates not pinned at a
/// bound.
pub fn projected_gradient_norm(theta: &[f64], grad: &[f64]) -> f64 {
    let (lo, hi) = log_param_bounds(theta.len() - 2);
    // The likelihood is maximized, so pass the gradient of its negative.
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    optim::projected_gradient_norm(theta, &neg, &lo, &hi)
}
