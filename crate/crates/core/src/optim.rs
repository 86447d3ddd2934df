//! Box-constrained quasi-Newton minimization (projected L-BFGS with
//! backtracking), used for GP hyperparameter fitting.

#[derive(Debug, Clone, Copy)]
pub struct BoxOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient's max-norm drops below this.
    pub gtol: f64,
    /// Stop when the relative objective decrease drops below this.
    pub ftol: f64,
    pub memory: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions {
            max_iters: 200,
            gtol: 1e-7,
            ftol: 1e-13,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Free coordinates: not pinned at a bound by a gradient pushing outward.
fn free_mask(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
        .collect()
}

/// Max-norm of the gradient restricted to free coordinates.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    free_mask(x, g, lo, hi)
        .iter()
        .zip(g)
        .filter(|(free, _)| **free)
        .fold(0.0, |m, (_, gi)| m.max(gi.abs()))
}

/// Minimizes `f` over the box `[lo, hi]`. `f` returns the value and gradient,
/// or `None` where it cannot be evaluated (treated as +inf).
pub fn minimize_box<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &BoxOptions) -> Option<BoxResult>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        iterations = it + 1;
        let free = free_mask(&x, &g, lo, hi);
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm < opts.gtol {
            break;
        }

        // Two-loop recursion on the free subspace.
        let mut q = pg.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            (0..n).filter(|&i| free[i]).map(|i| a[i] * b[i]).sum()
        };
        for j in (0..m).rev() {
            let sy = dot(&s_hist[j], &y_hist[j]);
            if sy <= 0.0 {
                continue;
            }
            alpha[j] = dot(&s_hist[j], &q) / sy;
            for i in 0..n {
                if free[i] {
                    q[i] -= alpha[j] * y_hist[j][i];
                }
            }
        }
        if m > 0 {
            let sy = dot(&s_hist[m - 1], &y_hist[m - 1]);
            let yy = dot(&y_hist[m - 1], &y_hist[m - 1]);
            if sy > 0.0 && yy > 0.0 {
                let gamma = sy / yy;
                q.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for j in 0..m {
            let sy = dot(&s_hist[j], &y_hist[j]);
            if sy <= 0.0 {
                continue;
            }
            let beta = dot(&y_hist[j], &q) / sy;
            for i in 0..n {
                if free[i] {
                    q[i] += s_hist[j][i] * (alpha[j] - beta);
                }
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &pg) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            s_hist.clear();
            y_hist.clear();
        }

        let mut step = if s_hist.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * dir[i]).collect();
            project(&mut xn, lo, hi);
            let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            if let Some((fnew, gnew)) = f(&xn) {
                if fnew.is_finite() && fnew <= fx + 1e-4 * decrease {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if s_hist.is_empty() {
                break;
            }
            // Retry from steepest descent.
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gnew[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-14 {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let rel = (fx - fnew).abs() / fx.abs().max(1.0);
        x = xn;
        fx = fnew;
        g = gnew;
        if rel < opts.ftol {
            break;
        }
    }
    Some(BoxResult {
        x,
        value: fx,
        iterations,
    })
}
