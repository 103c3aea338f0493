use proptest::prelude::*;

use rurv::bounds::{density_cdf, theorem_bounds, DensityParams};
use rurv::dense::{householder_qr, jacobi_svd_values, orthogonality_defect, ql_decompose, rq_decompose, Matrix};
use rurv::haar::{sample_haar_orthogonal, SeededRng};
use rurv::harness::{format_matrix, parse_matrix};
use rurv::metrics::{percentile, rank_reveal_metrics};
use rurv::rurv::{rulv, rurv};
use rurv::spectrum::{realize_spectrum, synthesize_matrix, SpectrumSpec};

const EPS: f64 = f64::EPSILON;

fn square() -> impl Strategy<Value = Matrix> {
    (1usize..12).prop_flat_map(|n| {
        prop::collection::vec(-1e3f64..1e3, n * n).prop_map(move |data| Matrix::new(n, n, data).unwrap())
    })
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    let scale = b.frobenius_norm().max(f64::MIN_POSITIVE);
    a.sub(b).unwrap().frobenius_norm() / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorizations_reproduce_input(a in square()) {
        let n = a.rows() as f64;
        let qr = householder_qr(&a).unwrap();
        let ql = ql_decompose(&a).unwrap();
        let rq = rq_decompose(&a).unwrap();
        prop_assert!(rel(&qr.recombine(), &a) <= 100.0 * n * EPS);
        prop_assert!(rel(&ql.recombine(), &a) <= 100.0 * n * EPS);
        prop_assert!(rel(&rq.recombine(), &a) <= 100.0 * n * EPS);
        prop_assert!(orthogonality_defect(&qr.q) <= 10.0 * n * EPS);
        prop_assert!(qr.r.is_upper_triangular() && ql.l.is_lower_triangular() && rq.r.is_upper_triangular());
        prop_assert!(qr.r.diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn singular_values_match_frobenius_and_rotation(a in square(), seed in any::<u64>()) {
        let v = jacobi_svd_values(&a).unwrap();
        prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
        let energy: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((energy - a.frobenius_norm()).abs() <= 1e-12 * a.frobenius_norm().max(1.0));
        let q = sample_haar_orthogonal(a.rows(), &mut SeededRng::new(seed, 0)).into_matrix();
        let w = jacobi_svd_values(&q.matmul(&a).unwrap()).unwrap();
        for (x, y) in v.iter().zip(&w) {
            prop_assert!((x - y).abs() <= 1e-11 * v[0].max(1.0));
        }
    }

    #[test]
    fn rurv_and_rulv_reconstruct(a in square(), seed in any::<u64>()) {
        let n = a.rows() as f64;
        let u = rurv(&a, &mut SeededRng::new(seed, 1)).unwrap();
        prop_assert!(rel(&u.reconstruct(), &a) <= 100.0 * n * EPS);
        prop_assert!(u.r.is_upper_triangular());
        let l = rulv(&a, &mut SeededRng::new(seed, 1)).unwrap();
        prop_assert!(rel(&l.reconstruct(), &a) <= 100.0 * n * EPS);
        prop_assert!(l.l.is_lower_triangular());
    }

    #[test]
    fn interlacing_keeps_ratios_above_one(
        n in 4usize..30,
        frac in 0.1f64..0.9,
        log_gap in 0.0f64..8.0,
        seed in any::<u64>(),
    ) {
        let r = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let sigma = realize_spectrum(&SpectrumSpec::logspace(n, r, 10f64.powf(log_gap), 1e9)).unwrap();
        let mut rng = SeededRng::new(seed, 2);
        let a = synthesize_matrix(&sigma, &mut rng).unwrap();
        let f = rurv(&a, &mut rng).unwrap();
        let m = rank_reveal_metrics(&sigma, &f.r, r).unwrap();
        prop_assert!(!m.flagged);
        prop_assert!(m.ratio1 >= 1.0 - 1e-6 && m.ratio2 >= 1.0 - 1e-6, "{m:?}");
        prop_assert!(m.norm3 >= 0.0);
    }

    #[test]
    fn spectra_descend_with_pinned_ends(n in 3usize..200, frac in 0.0f64..1.0, log_gap in 0.0f64..13.0) {
        let r = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let gap = 10f64.powf(log_gap);
        let s = realize_spectrum(&SpectrumSpec::logspace(n, r, gap, 1e13)).unwrap();
        prop_assert_eq!(s[0], 1e13);
        prop_assert_eq!(s[n - 1], 1.0);
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((s[r - 1] / s[r] / gap - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn percentile_is_monotone_and_bracketed(
        mut data in prop::collection::vec(-1e6f64..1e6, 1..300),
        p in 0.0f64..=1.0,
        q in 0.0f64..=1.0,
    ) {
        data.sort_by(f64::total_cmp);
        let (lo, hi) = (p.min(q), p.max(q));
        let (a, b) = (percentile(&data, lo), percentile(&data, hi));
        prop_assert!(a <= b);
        prop_assert!(data[0] <= a && b <= data[data.len() - 1]);
    }

    #[test]
    fn density_cdf_is_a_distribution(r in 1usize..40, extra in 1usize..40, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let p = DensityParams::new(r, 2 * r + extra).unwrap();
        let (lo, hi) = (x.min(y), x.max(y));
        let (a, b) = (density_cdf(p, lo).unwrap(), density_cdf(p, hi).unwrap());
        prop_assert!((0.0..=1.0 + 1e-9).contains(&a));
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn bounds_shrink_as_delta_grows(r in 31usize..400, extra in 31usize..400, d in 0.001f64..0.5) {
        let small = theorem_bounds(r, r + extra, d, Some(1e7)).unwrap();
        let large = theorem_bounds(r, r + extra, 2.0 * d, Some(1e7)).unwrap();
        prop_assert!(large.b1 < small.b1 && large.b4 < small.b4);
        prop_assert!((small.b1 / large.b1 - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn matrix_text_round_trip_is_exact(a in square()) {
        let back = parse_matrix(&format_matrix(&a)).unwrap();
        prop_assert_eq!(back.as_slice(), a.as_slice());
    }
}
