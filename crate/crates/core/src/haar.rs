//! Seeded Gaussian and Haar-orthogonal sampling.
//!
//! [`SeededRng`] is a ChaCha8 stream cipher keyed by a 64-bit seed, with a
//! separate 64-bit stream id. Trial `t` of an experiment reads stream `t`, so
//! its draws do not depend on which thread runs it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{householder_qr, jacobi_svd_values, Matrix};

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Stream for trial `trial` of grid point `grid`.
    pub fn for_trial(seed: u64, grid: u32, trial: u32) -> Self {
        Self::new(seed, (u64::from(grid) << 32) | u64::from(trial))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Pair of independent N(0,1) draws by the Box–Muller transform.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (radius * c, radius * s)
    }

    fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.normal_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair().0;
        }
    }
}

/// `rows × cols` matrix of i.i.d. N(0,1) entries, filled in row-major order.
pub fn sample_gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let mut data = vec![0.0; rows * cols];
    rng.fill_normal(&mut data);
    Matrix::new(rows, cols, data).expect("length matches by construction")
}

pub fn sample_gaussian_vector(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut v = vec![0.0; n];
    rng.fill_normal(&mut v);
    v
}

/// An orthogonal matrix drawn from the Haar measure on O(n).
#[derive(Debug, Clone)]
pub struct HaarSample {
    v: Matrix,
}

impl HaarSample {
    pub fn matrix(&self) -> &Matrix {
        &self.v
    }

    pub fn into_matrix(self) -> Matrix {
        self.v
    }
}

/// Haar orthogonal matrix: the Q factor of a Gaussian matrix, with the sign
/// of each column fixed so that R has a nonnegative diagonal.
pub fn sample_haar_orthogonal(n: usize, rng: &mut SeededRng) -> HaarSample {
    let b = sample_gaussian_matrix(n, n, rng);
    let qr = householder_qr(&b).expect("square finite Gaussian input");
    HaarSample { v: qr.q }
}

/// Smallest singular value of the leading `r × r` block of a fresh n×n Haar matrix.
///
/// # Panics
/// Panics unless `1 <= r < n`.
pub fn sample_corner_smin(n: usize, r: usize, rng: &mut SeededRng) -> f64 {
    assert!(r >= 1 && r < n, "corner size must satisfy 1 <= r < n (r = {r}, n = {n})");
    let v = sample_haar_orthogonal(n, rng).into_matrix();
    let corner = v.block(0, r, 0, r);
    let values = jacobi_svd_values(&corner).expect("Haar corners are finite and well scaled");
    *values.last().expect("r >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::orthogonality_defect;

    #[test]
    fn same_seed_same_bits() {
        let a = sample_gaussian_matrix(7, 5, &mut SeededRng::new(99, 3));
        let b = sample_gaussian_matrix(7, 5, &mut SeededRng::new(99, 3));
        assert_eq!(a.as_slice(), b.as_slice());
        let c = sample_gaussian_matrix(7, 5, &mut SeededRng::new(99, 4));
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn trial_streams_are_distinct() {
        let a = SeededRng::for_trial(1, 0, 1).uniform();
        let b = SeededRng::for_trial(1, 1, 0).uniform();
        assert_ne!(a, b);
        assert_eq!(SeededRng::for_trial(1, 2, 3).stream(), (2u64 << 32) | 3);
    }

    #[test]
    fn gaussian_moments() {
        let m = sample_gaussian_matrix(1000, 1000, &mut SeededRng::new(2024, 0));
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.005, "variance {var}");
    }

    #[test]
    fn haar_is_orthogonal() {
        let v = sample_haar_orthogonal(100, &mut SeededRng::new(5, 0));
        assert!(orthogonality_defect(v.matrix()) <= 10.0 * 100.0 * f64::EPSILON);
    }

    #[test]
    fn corner_values_in_unit_interval() {
        let mut rng = SeededRng::new(6, 0);
        for _ in 0..50 {
            let s = sample_corner_smin(12, 5, &mut rng);
            assert!((0.0..=1.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn large_corner_contains_unit_values() {
        // for r > n/2 the r×r corner carries 2r − n unit singular values
        let mut rng = SeededRng::new(7, 0);
        let v = sample_haar_orthogonal(10, &mut rng).into_matrix();
        let values = jacobi_svd_values(&v.block(0, 8, 0, 8)).unwrap();
        assert!(values.iter().filter(|&&s| s >= 1.0 - 1e-10).count() >= 6);
    }

    #[test]
    #[should_panic]
    fn corner_must_be_proper() {
        sample_corner_smin(4, 4, &mut SeededRng::new(0, 0));
    }
}
