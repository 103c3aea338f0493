use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Diagonal entries below this magnitude are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-300;

/// Solves `r · x = b` by back substitution on the upper triangle of `r`.
///
/// No pivoting: a zero or subnormal diagonal entry is reported with its index.
pub fn solve_upper_triangular(r: &Matrix, b: &Matrix) -> Result<Matrix> {
    r.ensure_square("solve_upper_triangular")?;
    let n = r.rows();
    if b.rows() != n {
        return Err(Error::dim(
            "solve_upper_triangular",
            format!("{n} rows on the right-hand side"),
            b.shape_str(),
        ));
    }
    if let Some(index) = (0..n).find(|&i| !(r[(i, i)].abs() >= SINGULAR_PIVOT)) {
        return Err(Error::Singular {
            index,
            value: r[(index, index)],
        });
    }

    let mut x = b.clone();
    let p = b.cols();
    let mut acc = vec![0.0; p];
    for i in (0..n).rev() {
        acc.copy_from_slice(x.row(i));
        for j in i + 1..n {
            let rij = r[(i, j)];
            if rij != 0.0 {
                for (a, &xj) in acc.iter_mut().zip(x.row(j)) {
                    *a -= rij * xj;
                }
            }
        }
        let d = r[(i, i)];
        for (xi, a) in x.row_mut(i).iter_mut().zip(&acc) {
            *xi = a / d;
        }
    }
    Ok(x)
}
