//! Small dense linear algebra on row-major square matrices.

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// when a pivot is not positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Cholesky-like factor of a symmetric positive semi-definite matrix: pivots
/// below `tol` are treated as zero and their column is dropped.
pub fn cholesky_psd(a: &[f64], n: usize, tol: f64) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            continue;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    l
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
    x
}

/// Solves `L^T x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solves `(L L^T) x = b`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let y = solve_lower(l, n, b);
    solve_lower_transpose(l, n, &y)
}

/// Inverse of `L L^T`.
pub fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    // Invert L column by column, then form L^-T L^-1.
    let mut linv = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve_lower(l, n, &e);
        for i in 0..n {
            linv[i * n + j] = col[i];
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i.max(j)..n {
                s += linv[k * n + i] * linv[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (-(i as f64 - j as f64).powi(2) / 4.0).exp();
            }
            a[i * n + i] += 0.1;
        }
        a
    }

    #[test]
    fn factor_solve_inverse() {
        let n = 6;
        let a = spd(n);
        let l = cholesky(&a, n).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let x = cholesky_solve(&l, n, &b);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let inv = cholesky_inverse(&l, n);
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((r - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn psd_factor_of_rank_one() {
        let a = [1.0, 1.0, 1.0, 1.0];
        let l = cholesky_psd(&a, 2, 1e-12);
        assert_eq!(l, vec![1.0, 0.0, 1.0, 0.0]);
    }
}
