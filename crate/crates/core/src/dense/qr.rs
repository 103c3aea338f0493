//! Householder QR and the QL / RQ factorizations derived from it.
//!
//! Every triangular factor is returned with a nonnegative diagonal and with
//! exact zeros in its structurally-zero half. With that convention the QR of
//! a Gaussian matrix has a Haar-distributed orthogonal factor, and inputs that
//! already are triangular with positive diagonal are fixed points.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// `a = q · r` with `q` orthogonal (rows × rows) and `r` upper triangular (rows × cols).
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

/// `a = q · l` with `q` orthogonal and `l` lower triangular.
#[derive(Debug, Clone)]
pub struct QlFactors {
    pub q: Matrix,
    pub l: Matrix,
}

/// `a = r · q` with `r` upper triangular and `q` orthogonal.
#[derive(Debug, Clone)]
pub struct RqFactors {
    pub r: Matrix,
    pub q: Matrix,
}

impl QrFactors {
    pub fn recombine(&self) -> Matrix {
        self.q.matmul(&self.r).expect("conformal by construction")
    }
}

impl QlFactors {
    pub fn recombine(&self) -> Matrix {
        self.q.matmul(&self.l).expect("conformal by construction")
    }
}

impl RqFactors {
    pub fn recombine(&self) -> Matrix {
        self.r.matmul(&self.q).expect("conformal by construction")
    }
}

/// Euclidean norm, rescaled only when the plain sum of squares leaves the normal range.
fn norm2(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let ss: f64 = x.clone().map(|v| v * v).sum();
    if ss.is_finite() && ss > 1e-280 {
        return ss.sqrt();
    }
    let scale = x.clone().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

/// Householder QR with the nonnegative-diagonal sign convention.
pub fn householder_qr(a: &Matrix) -> Result<QrFactors> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m < n {
        return Err(Error::dim("householder_qr", "rows >= cols >= 1", a.shape_str()));
    }
    a.ensure_finite("householder_qr")?;

    let mut r = a.clone();
    // Householder vectors v_k (with implicit v_k[0] = 1) and their scalars tau_k.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut taus = Vec::with_capacity(n);
    let mut w = vec![0.0; n.max(m)];

    for k in 0..n {
        let x0 = r[(k, k)];
        let tail_norm = norm2((k + 1..m).map(|i| r[(i, k)]));
        if tail_norm == 0.0 {
            vs.push(Vec::new());
            taus.push(0.0);
            continue;
        }
        let norm = x0.hypot(tail_norm);
        let beta = if x0 >= 0.0 { -norm } else { norm };
        let denom = x0 - beta;
        let mut v = Vec::with_capacity(m - k);
        v.push(1.0);
        v.extend((k + 1..m).map(|i| r[(i, k)] / denom));
        let tau = (beta - x0) / beta;

        // trailing columns: A <- (I - tau v vᵀ) A
        let wk = &mut w[k + 1..n];
        wk.fill(0.0);
        for (vi, i) in v.iter().zip(k..m) {
            for (wj, &aij) in wk.iter_mut().zip(&r.row(i)[k + 1..n]) {
                *wj += vi * aij;
            }
        }
        for (vi, i) in v.iter().zip(k..m) {
            let s = tau * vi;
            for (aij, &wj) in r.row_mut(i)[k + 1..n].iter_mut().zip(wk.iter()) {
                *aij -= s * wj;
            }
        }
        r[(k, k)] = beta;
        for i in k + 1..m {
            r[(i, k)] = 0.0;
        }
        vs.push(v);
        taus.push(tau);
    }
    r.zero_below_diagonal();

    // Q = H_0 H_1 ... H_{n-1}, accumulated backwards onto the identity.
    let mut q = Matrix::identity(m);
    for k in (0..n).rev() {
        let tau = taus[k];
        if tau == 0.0 {
            continue;
        }
        let v = &vs[k];
        let wk = &mut w[k..m];
        wk.fill(0.0);
        for (vi, i) in v.iter().zip(k..m) {
            for (wj, &qij) in wk.iter_mut().zip(&q.row(i)[k..m]) {
                *wj += vi * qij;
            }
        }
        for (vi, i) in v.iter().zip(k..m) {
            let s = tau * vi;
            for (qij, &wj) in q.row_mut(i)[k..m].iter_mut().zip(wk.iter()) {
                *qij -= s * wj;
            }
        }
    }

    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for x in &mut r.row_mut(i)[i..] {
                *x = -*x;
            }
            for row in 0..m {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Ok(QrFactors { q, r })
}

/// QL through the half-turn reduction: `QR(J·A·J) = Q̃·R̃` gives `A = (J·Q̃·J)(J·R̃·J)`.
pub fn ql_decompose(a: &Matrix) -> Result<QlFactors> {
    a.ensure_square("ql_decompose")?;
    let f = householder_qr(&a.rotate_half_turn())?;
    Ok(QlFactors {
        q: f.q.rotate_half_turn(),
        l: f.r.rotate_half_turn(),
    })
}

/// RQ from the QL of the transpose: `Aᵀ = Q·L` gives `A = Lᵀ·Qᵀ`.
pub fn rq_decompose(a: &Matrix) -> Result<RqFactors> {
    a.ensure_square("rq_decompose")?;
    let f = ql_decompose(&a.transpose())?;
    Ok(RqFactors {
        r: f.l.transpose(),
        q: f.q.transpose(),
    })
}

/// `‖qᵀq − I‖_F`.
pub fn orthogonality_defect(q: &Matrix) -> f64 {
    let g = q.transpose_matmul(q).expect("qᵀq is always conformal");
    let n = g.rows();
    let mut ss = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = g[(i, j)] - if i == j { 1.0 } else { 0.0 };
            ss += d * d;
        }
    }
    ss.sqrt()
}
