//! Singular values by one-sided (Hestenes) Jacobi, and the spectral norm by
//! power iteration.
//!
//! Jacobi works on column pairs and never forms AᵀA, so small singular values
//! keep their relative accuracy when the columns are badly scaled, which is
//! the situation for the leading block of a rank-revealing R.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};
use crate::haar::{sample_gaussian_vector, SeededRng};

pub const MAX_SWEEPS: usize = 30;

/// Singular values of `a` (rows ≥ cols), sorted descending.
pub fn jacobi_svd_values(a: &Matrix) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::dim("jacobi_svd_values", "rows >= cols", a.shape_str()));
    }
    a.ensure_finite("jacobi_svd_values")?;
    // rows of `g` are the columns of `a`
    let mut g = a.transpose();
    let tol = ((m as f64).sqrt() * f64::EPSILON).max(1e-15);

    let mut converged = n < 2;
    let mut off = 0.0_f64;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (gp, gq) = (g.row(p), g.row(q));
                    (dot(gp, gp), dot(gq, gq), dot(gp, gq))
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let measure = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                off = off.max(measure);
                if measure <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                let data = g.as_mut_slice();
                let (head, tail) = data.split_at_mut(q * m);
                let gp = &mut head[p * m..(p + 1) * m];
                let gq = &mut tail[..m];
                for (x, y) in gp.iter_mut().zip(gq.iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Convergence {
            sweeps: MAX_SWEEPS,
            off_diagonality: off,
        });
    }

    let mut values: Vec<f64> = (0..n).map(|i| norm_of(g.row(i))).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

fn norm_of(x: &[f64]) -> f64 {
    let ss = dot(x, x);
    if ss.is_finite() && ss > 1e-280 {
        return ss.sqrt();
    }
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000;
const POWER_START_SEED: u64 = 0x5EED_0F_5EED;

/// Largest singular value by power iteration on `aᵀa`.
///
/// The start vector is drawn from a fixed seed, so the result is a pure
/// function of `a`. Iteration stops once the estimate changes by less than
/// 1e-12 relative, or after 10 000 steps.
pub fn spectral_norm(a: &Matrix) -> f64 {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    // work on a rescaled copy so squared norms stay representable
    let scale = a.max_abs();
    let a = a.scaled(1.0 / scale);

    let mut x = sample_gaussian_vector(n, &mut SeededRng::new(POWER_START_SEED, 0));
    let nx = norm_of(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; n];
    let mut estimate = 0.0_f64;

    for _ in 0..POWER_MAX_ITERS {
        for (yi, i) in y.iter_mut().zip(0..m) {
            *yi = dot(a.row(i), &x);
        }
        let next = norm_of(&y);
        z.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (zj, &aij) in z.iter_mut().zip(a.row(i)) {
                *zj += aij * yi;
            }
        }
        let nz = norm_of(&z);
        if nz == 0.0 {
            // x landed in the null space; the current estimate is the answer
            estimate = estimate.max(next);
            break;
        }
        let done = (next - estimate).abs() <= POWER_TOL * next;
        estimate = next;
        if done {
            break;
        }
        for (xj, &zj) in x.iter_mut().zip(&z) {
            *xj = zj / nz;
        }
    }
    estimate * scale
}
