//! Test matrices with prescribed singular values and Haar singular vectors.

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::haar::{sample_haar_orthogonal, SeededRng};

pub const DEFAULT_TOP: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    /// `σ₁ = … = σ_r = gap`, `σ_{r+1} = … = σ_n = 1`
    Stair,
    /// `σ₁ = top`, `σ_n = 1`, geometric except for one step of size `gap` after index r
    Logspace,
}

impl std::str::FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stair" => Ok(Self::Stair),
            "logspace" => Ok(Self::Logspace),
            other => Err(Error::Parse(format!("unknown distribution {other:?} (stair|logspace)"))),
        }
    }
}

impl std::fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stair => "stair",
            Self::Logspace => "logspace",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub n: usize,
    pub r: usize,
    pub gap: f64,
    #[serde(default = "default_top")]
    pub top: f64,
}

fn default_top() -> f64 {
    DEFAULT_TOP
}

impl SpectrumSpec {
    pub fn stair(n: usize, r: usize, gap: f64) -> Self {
        Self {
            kind: SpectrumKind::Stair,
            n,
            r,
            gap,
            top: DEFAULT_TOP,
        }
    }

    pub fn logspace(n: usize, r: usize, gap: f64, top: f64) -> Self {
        Self {
            kind: SpectrumKind::Logspace,
            n,
            r,
            gap,
            top,
        }
    }
}

/// Descending singular values for `spec`.
pub fn realize_spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>> {
    let SpectrumSpec { kind, n, r, gap, top } = *spec;
    if n < 2 || r == 0 || r >= n {
        return Err(Error::Constraint(format!("need n >= 2 and 1 <= r < n, got n = {n}, r = {r}")));
    }
    if !(gap >= 1.0) || !gap.is_finite() {
        return Err(Error::Constraint(format!("gap must be finite and >= 1, got {gap}")));
    }
    match kind {
        SpectrumKind::Stair => Ok((0..n).map(|i| if i < r { gap } else { 1.0 }).collect()),
        SpectrumKind::Logspace => {
            if !top.is_finite() || gap > top {
                return Err(Error::Constraint(format!("logspace needs gap <= top, got gap = {gap}, top = {top}")));
            }
            if n == 2 {
                if gap != top {
                    return Err(Error::Constraint("logspace with n = 2 needs gap = top".into()));
                }
                return Ok(vec![top, 1.0]);
            }
            let ln_rho = (top / gap).ln() / (n - 2) as f64;
            let mut sigma: Vec<f64> = (0..n)
                .map(|i| {
                    // zero-based i; steps below i, excluding the gap step at r−1 → r
                    let steps = (n - 1 - i) - usize::from(i < r);
                    let base = (ln_rho * steps as f64).exp();
                    if i < r {
                        gap * base
                    } else {
                        base
                    }
                })
                .collect();
            sigma[0] = top;
            sigma[n - 1] = 1.0;
            Ok(sigma)
        }
    }
}

/// `P · diag(σ) · Qᵀ` with `P`, `Q` independent Haar samples (P drawn first).
pub fn synthesize_matrix(sigma: &[f64], rng: &mut SeededRng) -> Result<Matrix> {
    if sigma.is_empty() {
        return Err(Error::Empty("synthesize_matrix"));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Constraint("singular values must be positive and finite".into()));
    }
    let n = sigma.len();
    let p = sample_haar_orthogonal(n, rng).into_matrix();
    let q = sample_haar_orthogonal(n, rng).into_matrix();
    p.scale_columns(sigma)?.matmul_transpose(&q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{jacobi_svd_values, orthogonality_defect};

    #[test]
    fn stair_values() {
        let s = realize_spectrum(&SpectrumSpec::stair(4, 2, 10.0)).unwrap();
        assert_eq!(s, vec![10.0, 10.0, 1.0, 1.0]);
    }

    #[test]
    fn logspace_three() {
        let s = realize_spectrum(&SpectrumSpec::logspace(3, 1, 1e7, 1e13)).unwrap();
        assert_eq!(s[0], 1e13);
        assert!((s[1] - 1e6).abs() <= 1e-9 * 1e6);
        assert_eq!(s[2], 1.0);
    }

    #[test]
    fn logspace_ratios() {
        let (n, r, gap) = (40, 20, 1e7);
        let s = realize_spectrum(&SpectrumSpec::logspace(n, r, gap, 1e13)).unwrap();
        let rho = (1e13f64 / gap).powf(1.0 / (n - 2) as f64);
        for i in 0..n - 1 {
            let want = if i == r - 1 { gap } else { rho };
            assert!((s[i] / s[i + 1] - want).abs() <= 1e-10 * want, "step {i}");
        }
    }

    #[test]
    fn infeasible_specs() {
        assert!(matches!(
            realize_spectrum(&SpectrumSpec::logspace(10, 5, 1e14, 1e13)),
            Err(Error::Constraint(_))
        ));
        assert!(realize_spectrum(&SpectrumSpec::stair(4, 4, 10.0)).is_err());
        assert!(realize_spectrum(&SpectrumSpec::stair(4, 2, 0.5)).is_err());
    }

    #[test]
    fn unit_spectrum_gives_orthogonal() {
        let a = synthesize_matrix(&[1.0; 12], &mut SeededRng::new(1, 0)).unwrap();
        assert!(orthogonality_defect(&a) <= 1e-13);
    }

    #[test]
    fn small_round_trip() {
        let a = synthesize_matrix(&[3.0, 2.0, 1.0], &mut SeededRng::new(2, 0)).unwrap();
        let v = jacobi_svd_values(&a).unwrap();
        for (got, want) in v.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn frobenius_identity() {
        let s = realize_spectrum(&SpectrumSpec::logspace(50, 25, 1e3, 1e6)).unwrap();
        let a = synthesize_matrix(&s, &mut SeededRng::new(3, 0)).unwrap();
        let want: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((a.frobenius_norm() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn ill_conditioned_round_trip() {
        let sigma: Vec<f64> = (0..100).map(|i| 10f64.powf(13.0 * (1.0 - i as f64 / 99.0))).collect();
        let a = synthesize_matrix(&sigma, &mut SeededRng::new(4, 0)).unwrap();
        let v = jacobi_svd_values(&a).unwrap();
        assert!((v[0] - sigma[0]).abs() <= 1e-12 * sigma[0]);
        assert!((v[99] - 1.0).abs() <= 1e-2);
    }

    #[test]
    fn streams_change_matrix_not_spectrum() {
        let sigma = [5.0, 4.0, 2.0, 1.0];
        let a = synthesize_matrix(&sigma, &mut SeededRng::new(5, 0)).unwrap();
        let b = synthesize_matrix(&sigma, &mut SeededRng::new(5, 1)).unwrap();
        assert_ne!(a, b);
        for (x, y) in jacobi_svd_values(&a).unwrap().iter().zip(jacobi_svd_values(&b).unwrap()) {
            assert!((x - y).abs() <= 1e-13 * x);
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        let mut rng = SeededRng::new(0, 0);
        assert!(synthesize_matrix(&[], &mut rng).is_err());
        assert!(synthesize_matrix(&[1.0, 0.0], &mut rng).is_err());
        assert!(synthesize_matrix(&[1.0, f64::NAN], &mut rng).is_err());
    }
}
