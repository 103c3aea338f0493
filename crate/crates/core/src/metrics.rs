//! Per-trial measurements of the rank-revealing quantities and their summaries.
//!
//! For a split after index r of `R = [[R₁₁, R₁₂], [0, R₂₂]]`:
//! `ratio1 = σ_r / σ_min(R₁₁)`, `ratio2 = σ_max(R₂₂) / σ_{r+1}` and
//! `norm3 = ‖R₁₁⁻¹R₁₂‖₂`. Interlacing gives `ratio1, ratio2 ≥ 1` on every run.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundSet;
use crate::dense::{jacobi_svd_values, solve_upper_triangular, spectral_norm, Matrix};
use crate::error::{Error, Result};
use crate::rurv::split_r;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankMetrics {
    pub ratio1: f64,
    pub ratio2: f64,
    pub norm3: f64,
    /// `R₁₁` was numerically singular; `ratio1` and `norm3` are then infinite.
    pub flagged: bool,
}

/// Measures `r` (upper triangular, n×n) against the true spectrum `sigma`.
pub fn rank_reveal_metrics(sigma: &[f64], r: &Matrix, split: usize) -> Result<RankMetrics> {
    if sigma.len() != r.rows() {
        return Err(Error::dim(
            "rank_reveal_metrics",
            format!("{} singular values", r.rows()),
            sigma.len().to_string(),
        ));
    }
    let blocks = split_r(r, split)?;
    let smin = *jacobi_svd_values(&blocks.r11)?.last().expect("split >= 1");
    let ratio2 = spectral_norm(&blocks.r22) / sigma[split];
    match solve_upper_triangular(&blocks.r11, &blocks.r12) {
        Ok(x) if smin > 0.0 => Ok(RankMetrics {
            ratio1: sigma[split - 1] / smin,
            ratio2,
            norm3: spectral_norm(&x),
            flagged: false,
        }),
        Ok(_) | Err(Error::Singular { .. }) => Ok(RankMetrics {
            ratio1: f64::INFINITY,
            ratio2,
            norm3: f64::INFINITY,
            flagged: true,
        }),
        Err(e) => Err(e),
    }
}

/// `‖a − u·r·v‖_F / ‖a‖_F`; zero for `a = 0` reproduced exactly, infinite
/// for `a = 0` with a nonzero reconstruction.
pub fn backward_error(a: &Matrix, u: &Matrix, r: &Matrix, v: &Matrix) -> Result<f64> {
    let residual = a.sub(&u.matmul(r)?.matmul(v)?)?.frobenius_norm();
    let scale = a.frobenius_norm();
    Ok(match (scale == 0.0, residual == 0.0) {
        (true, true) => 0.0,
        (true, false) => f64::INFINITY,
        _ => residual / scale,
    })
}

/// One trial of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub ratio1: f64,
    pub ratio2: f64,
    pub norm3: f64,
    pub backward_error: f64,
    pub orth_u: f64,
    pub orth_v: f64,
    pub flagged: bool,
}

impl TrialRecord {
    pub fn new(trial: usize, m: RankMetrics, backward_error: f64, orth_u: f64, orth_v: f64) -> Self {
        Self {
            trial,
            ratio1: m.ratio1,
            ratio2: m.ratio2,
            norm3: m.norm3,
            backward_error,
            orth_u,
            orth_v,
            flagged: m.flagged,
        }
    }
}

/// Linear interpolation on sorted data at zero-based index `p·(N−1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// value at the configured high percentile
    pub p_hi: f64,
    pub bound: Option<f64>,
    pub exceed_count: usize,
}

impl MetricSummary {
    fn from_values(mut values: Vec<f64>, percentile_hi: f64, bound: Option<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            min: values[0],
            q1: percentile(&values, 0.25),
            median: percentile(&values, 0.5),
            q3: percentile(&values, 0.75),
            max: values[values.len() - 1],
            p_hi: percentile(&values, percentile_hi),
            bound,
            exceed_count: bound.map_or(0, |b| values.iter().filter(|&&v| v > b).count()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub percentile: f64,
    /// records used for the statistics (unflagged)
    pub count: usize,
    pub flagged: usize,
    pub ratio1: MetricSummary,
    pub ratio2: MetricSummary,
    pub norm3: MetricSummary,
    pub max_backward_error: f64,
    pub max_orth_u: f64,
    pub max_orth_v: f64,
}

/// Order statistics over the unflagged records; exceedances counted against
/// `b1`, `b2` and whichever of `b4`/`b3` applies to `norm3`.
pub fn summarize(records: &[TrialRecord], bounds: Option<&BoundSet>, percentile_hi: f64) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::Empty("summarize"));
    }
    if !(0.0..=1.0).contains(&percentile_hi) {
        return Err(Error::Domain(format!("percentile must lie in [0,1], got {percentile_hi}")));
    }
    let good: Vec<&TrialRecord> = records.iter().filter(|t| !t.flagged).collect();
    if good.is_empty() {
        return Err(Error::Empty("summarize: every record is flagged"));
    }
    let column = |f: fn(&TrialRecord) -> f64| good.iter().map(|t| f(t)).collect::<Vec<_>>();
    let fmax = |f: fn(&TrialRecord) -> f64| records.iter().map(f).fold(0.0_f64, f64::max);
    Ok(Summary {
        percentile: percentile_hi,
        count: good.len(),
        flagged: records.len() - good.len(),
        ratio1: MetricSummary::from_values(column(|t| t.ratio1), percentile_hi, bounds.map(|b| b.b1)),
        ratio2: MetricSummary::from_values(column(|t| t.ratio2), percentile_hi, bounds.map(|b| b.b2)),
        norm3: MetricSummary::from_values(column(|t| t.norm3), percentile_hi, bounds.and_then(BoundSet::norm3_bound)),
        max_backward_error: fmax(|t| t.backward_error),
        max_orth_u: fmax(|t| t.orth_u),
        max_orth_v: fmax(|t| t.orth_v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::theorem_bounds;
    use crate::haar::{sample_gaussian_matrix, SeededRng};
    use crate::rurv::{rurv, rurv_with};

    fn record(trial: usize, x: f64) -> TrialRecord {
        TrialRecord {
            trial,
            ratio1: x,
            ratio2: x,
            norm3: x,
            backward_error: 0.0,
            orth_u: 0.0,
            orth_v: 0.0,
            flagged: false,
        }
    }

    #[test]
    fn unmixed_diagonal() {
        let sigma = [8.0, 4.0, 2.0, 1.0];
        let res = rurv_with(&Matrix::from_diag(&sigma), Matrix::identity(4)).unwrap();
        assert_eq!(res.r, Matrix::from_diag(&sigma));
        let m = rank_reveal_metrics(&sigma, &res.r, 2).unwrap();
        assert_eq!((m.ratio1, m.norm3, m.flagged), (1.0, 0.0, false));
        // power iteration approaches the norm from below
        assert!((m.ratio2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_leading_block_is_flagged() {
        let r = Matrix::from_rows(&[[0.0, 1.0], [0.0, 1.0]]);
        let m = rank_reveal_metrics(&[1.0, 1.0], &r, 1).unwrap();
        assert!(m.flagged && m.ratio1.is_infinite());
        assert_eq!(m.ratio2, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(rank_reveal_metrics(&[1.0], &Matrix::identity(2), 1).is_err());
    }

    #[test]
    fn backward_error_cases() {
        let i = Matrix::identity(3);
        assert_eq!(backward_error(&i, &i, &i, &i).unwrap(), 0.0);
        let z = Matrix::zeros(3, 3);
        assert_eq!(backward_error(&z, &i, &z, &i).unwrap(), 0.0);
        assert!(backward_error(&z, &i, &i, &i).unwrap().is_infinite());

        let a = sample_gaussian_matrix(100, 100, &mut SeededRng::new(1, 0));
        let res = rurv(&a, &mut SeededRng::new(2, 0)).unwrap();
        assert!(backward_error(&a, &res.u, &res.r, &res.v).unwrap() <= 1e-13);

        // first-order perturbation of U: residual ≈ ‖E·R·V‖/‖A‖ = ‖E·A'‖/‖A‖
        let e = sample_gaussian_matrix(100, 100, &mut SeededRng::new(3, 0));
        let e = e.scaled(1e-8 / e.frobenius_norm() * (100f64).sqrt());
        let perturbed = res.u.add(&e).unwrap();
        let err = backward_error(&a, &perturbed, &res.r, &res.v).unwrap();
        let want = e.matmul(&res.r).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(err / want > 1.0 / 3.0 && err / want < 3.0, "{err:e} vs {want:e}");
    }

    #[test]
    fn percentile_rule() {
        let data: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&data, 0.97) - 97.03).abs() < 1e-12);
        assert_eq!(percentile(&data, 0.5), 50.5);
        assert_eq!(percentile(&[4.0], 0.97), 4.0);
    }

    #[test]
    fn single_record_summary() {
        let s = summarize(&[record(0, 2.5)], None, 0.97).unwrap();
        for m in [&s.ratio1, &s.ratio2, &s.norm3] {
            assert_eq!([m.min, m.q1, m.median, m.q3, m.max, m.p_hi], [2.5; 6]);
            assert_eq!(m.exceed_count, 0);
        }
    }

    #[test]
    fn exceed_counts() {
        let records: Vec<_> = (1..=100).map(|i| record(i, i as f64)).collect();
        let mut b = theorem_bounds(40, 80, 0.5, None).unwrap();
        b.b1 = 101.0;
        b.b2 = 90.0;
        let s = summarize(&records, Some(&b), 0.97).unwrap();
        assert_eq!(s.ratio1.exceed_count, 0);
        assert_eq!(s.ratio2.exceed_count, 10);
        assert_eq!(s.norm3.bound, None);
        assert!((s.ratio1.p_hi - 97.03).abs() < 1e-12);
    }

    #[test]
    fn flagged_records_are_counted_and_excluded() {
        let mut records: Vec<_> = (0..5).map(|i| record(i, 1.0 + i as f64)).collect();
        records[4].flagged = true;
        records[4].ratio1 = f64::INFINITY;
        let s = summarize(&records, None, 0.97).unwrap();
        assert_eq!((s.count, s.flagged), (4, 1));
        assert_eq!(s.ratio1.max, 4.0);
    }

    #[test]
    fn empty_summary_is_an_error() {
        assert!(matches!(summarize(&[], None, 0.97), Err(Error::Empty(_))));
    }
}
