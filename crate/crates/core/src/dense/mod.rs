//! Dense real matrices and the factorization kernels everything else is built on.

mod matrix;
mod qr;
mod svd;
mod triangular;

pub use matrix::{gemm, transpose, Matrix};
pub use qr::{householder_qr, orthogonality_defect, ql_decompose, rq_decompose, QlFactors, QrFactors, RqFactors};
pub use svd::{jacobi_svd_values, spectral_norm, MAX_SWEEPS};
pub use triangular::{solve_upper_triangular, SINGULAR_PIVOT};
