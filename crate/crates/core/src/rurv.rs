//! Randomized URV and ULV factorizations.
//!
//! `rurv(A)` right-multiplies `A` by the transpose of a Haar matrix `V` and
//! takes a QR of the result: `A·Vᵀ = U·R`, hence `A = U·R·V`. Mixing the
//! columns with a Haar matrix is what makes `R` rank revealing with high
//! probability, for every split index at once. `rulv` is the same with QL.

use crate::dense::{householder_qr, ql_decompose, Matrix};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_orthogonal, SeededRng};

/// `A = u · r · v` with `u`, `v` orthogonal and `r` upper triangular.
#[derive(Debug, Clone)]
pub struct RurvResult {
    pub u: Matrix,
    pub r: Matrix,
    pub v: Matrix,
}

/// `A = u · l · v` with `l` lower triangular.
#[derive(Debug, Clone)]
pub struct RulvResult {
    pub u: Matrix,
    pub l: Matrix,
    pub v: Matrix,
}

/// The three nonzero blocks of an upper-triangular `R` split after row/column `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RBlocks {
    pub r11: Matrix,
    pub r12: Matrix,
    pub r22: Matrix,
}

impl RBlocks {
    /// Reassembles `[[r11, r12], [0, r22]]`.
    pub fn assemble(&self) -> Matrix {
        let k = self.r11.rows();
        let n = k + self.r22.rows();
        let mut out = Matrix::zeros(n, n);
        out.set_block(0, 0, &self.r11);
        out.set_block(0, k, &self.r12);
        out.set_block(k, k, &self.r22);
        out
    }
}

fn check_input(a: &Matrix, op: &'static str) -> Result<()> {
    a.ensure_square(op)?;
    if a.rows() == 0 {
        return Err(Error::Empty(op));
    }
    a.ensure_finite(op)
}

pub fn rurv(a: &Matrix, rng: &mut SeededRng) -> Result<RurvResult> {
    check_input(a, "rurv")?;
    let v = sample_haar_orthogonal(a.rows(), rng).into_matrix();
    rurv_with(a, v)
}

/// RURV with a caller-supplied orthogonal mixing matrix `v`.
///
/// With a Haar `v` this is exactly [`rurv`]; with `v = I` it degenerates to a
/// plain QR, which is useful for checking the metrics without mixing.
pub fn rurv_with(a: &Matrix, v: Matrix) -> Result<RurvResult> {
    check_input(a, "rurv")?;
    if v.rows() != a.rows() || !v.is_square() {
        return Err(Error::dim("rurv", format!("{0}x{0} mixing matrix", a.rows()), v.shape_str()));
    }
    let mixed = a.matmul_transpose(&v)?;
    let qr = householder_qr(&mixed)?;
    Ok(RurvResult { u: qr.q, r: qr.r, v })
}

pub fn rulv(a: &Matrix, rng: &mut SeededRng) -> Result<RulvResult> {
    check_input(a, "rulv")?;
    let v = sample_haar_orthogonal(a.rows(), rng).into_matrix();
    rulv_with(a, v)
}

pub fn rulv_with(a: &Matrix, v: Matrix) -> Result<RulvResult> {
    check_input(a, "rulv")?;
    if v.rows() != a.rows() || !v.is_square() {
        return Err(Error::dim("rulv", format!("{0}x{0} mixing matrix", a.rows()), v.shape_str()));
    }
    let mixed = a.matmul_transpose(&v)?;
    let ql = ql_decompose(&mixed)?;
    Ok(RulvResult { u: ql.q, l: ql.l, v })
}

/// Splits an n×n upper-triangular `r` into `R₁₁` (k×k), `R₁₂` (k×(n−k)) and `R₂₂`.
pub fn split_r(r: &Matrix, k: usize) -> Result<RBlocks> {
    r.ensure_square("split_r")?;
    let n = r.rows();
    if k == 0 || k >= n {
        return Err(Error::dim("split_r", format!("split index in 1..{n}"), k.to_string()));
    }
    Ok(RBlocks {
        r11: r.block(0, k, 0, k),
        r12: r.block(0, k, k, n),
        r22: r.block(k, n, k, n),
    })
}

impl RurvResult {
    pub fn split(&self, k: usize) -> Result<RBlocks> {
        split_r(&self.r, k)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.u
            .matmul(&self.r)
            .and_then(|ur| ur.matmul(&self.v))
            .expect("factors are conformal")
    }
}

impl RulvResult {
    pub fn reconstruct(&self) -> Matrix {
        self.u
            .matmul(&self.l)
            .and_then(|ul| ul.matmul(&self.v))
            .expect("factors are conformal")
    }
}
