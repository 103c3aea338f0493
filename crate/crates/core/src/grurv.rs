//! Generalized randomized URV of a product `M = A₁^{m₁} ⋯ A_k^{m_k}`, `mᵢ = ±1`.
//!
//! Neither `M` nor any inverse is ever formed. The last factor is handled by
//! RURV (or by RULV of its transpose when it is inverted); the resulting
//! orthogonal factor is then pushed to the front of the product one factor at
//! a time, by a QR (`mᵢ = 1`) or an RQ (`mᵢ = −1`). The output satisfies
//! `M = U · R₁^{m₁} ⋯ R_k^{m_k} · V` with every `Rᵢ` upper triangular.

use serde::{Deserialize, Serialize};

use crate::dense::{householder_qr, jacobi_svd_values, rq_decompose, solve_upper_triangular, Matrix};
use crate::error::{Error, Result};
use crate::haar::SeededRng;
use crate::metrics::{rank_reveal_metrics, RankMetrics};
use crate::rurv::{rulv, rurv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Exponent {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Exponent {
    pub fn as_i32(self) -> i32 {
        match self {
            Exponent::Plus => 1,
            Exponent::Minus => -1,
        }
    }
}

impl TryFrom<i32> for Exponent {
    type Error = Error;

    fn try_from(v: i32) -> Result<Self> {
        match v {
            1 => Ok(Exponent::Plus),
            -1 => Ok(Exponent::Minus),
            other => Err(Error::Domain(format!("exponent must be +1 or -1, got {other}"))),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" | "+" => Ok(Exponent::Plus),
            "-1" | "-" => Ok(Exponent::Minus),
            other => Err(Error::Parse(format!("exponent must be +1 or -1, got {other:?}"))),
        }
    }
}

/// Ordered list of square factors with exponents ±1.
#[derive(Debug, Clone)]
pub struct FactorChain {
    factors: Vec<(Matrix, Exponent)>,
}

impl FactorChain {
    /// Checks that the chain is nonempty and every factor is finite, square and of equal size.
    ///
    /// Nonsingularity of inverted factors is checked when GRURV reaches them.
    pub fn new(factors: Vec<(Matrix, Exponent)>) -> Result<Self> {
        let n = match factors.first() {
            Some((m, _)) => m.rows(),
            None => return Err(Error::Empty("FactorChain")),
        };
        if n == 0 {
            return Err(Error::Empty("FactorChain"));
        }
        for (m, _) in &factors {
            if m.rows() != n || m.cols() != n {
                return Err(Error::dim("FactorChain", format!("{n}x{n} factors"), m.shape_str()));
            }
            m.ensure_finite("FactorChain")?;
        }
        Ok(Self { factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factors[0].0.rows()
    }

    pub fn factors(&self) -> &[(Matrix, Exponent)] {
        &self.factors
    }

    pub fn exponents(&self) -> Vec<Exponent> {
        self.factors.iter().map(|(_, e)| *e).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GrurvResult {
    pub u_current: Matrix,
    pub v: Matrix,
    pub r_list: Vec<Matrix>,
    pub exponents: Vec<Exponent>,
}

/// An inverted factor must have `σ_min > n·ε·σ_max`. `tri` shares its singular values.
fn check_invertible(tri: &Matrix, factor: usize) -> Result<()> {
    let values = jacobi_svd_values(tri)?;
    let (hi, lo) = (values[0], values[values.len() - 1]);
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio <= tri.rows() as f64 * f64::EPSILON {
        return Err(Error::SingularFactor { factor, ratio });
    }
    Ok(())
}

pub fn grurv(chain: &FactorChain, rng: &mut SeededRng) -> Result<GrurvResult> {
    grurv_observed(chain, rng, |_, _| {})
}

/// [`grurv`], calling `observe(i, U_current)` after factor `i` has been absorbed.
pub fn grurv_observed(
    chain: &FactorChain,
    rng: &mut SeededRng,
    mut observe: impl FnMut(usize, &Matrix),
) -> Result<GrurvResult> {
    let k = chain.len();
    let mut r_list = vec![Matrix::zeros(0, 0); k];

    let (last, last_exp) = &chain.factors[k - 1];
    let (mut u_current, v) = match last_exp {
        Exponent::Plus => {
            let res = rurv(last, rng)?;
            r_list[k - 1] = res.r;
            (res.u, res.v)
        }
        Exponent::Minus => {
            // Aᵀ = U·L·V  ⇒  A⁻¹ = U·(Lᵀ)⁻¹·V
            let res = rulv(&last.transpose(), rng)?;
            let r = res.l.transpose();
            check_invertible(&r, k - 1)?;
            r_list[k - 1] = r;
            (res.u, res.v)
        }
    };
    observe(k - 1, &u_current);

    for i in (0..k - 1).rev() {
        let (a, exp) = &chain.factors[i];
        match exp {
            Exponent::Plus => {
                // A·U_cur = U·R
                let qr = householder_qr(&a.matmul(&u_current)?)?;
                r_list[i] = qr.r;
                u_current = qr.q;
            }
            Exponent::Minus => {
                // U_curᵀ·A = R·Q  ⇒  A⁻¹·U_cur = Qᵀ·R⁻¹
                let rq = rq_decompose(&u_current.transpose_matmul(a)?)?;
                check_invertible(&rq.r, i)?;
                r_list[i] = rq.r;
                u_current = rq.q.transpose();
            }
        }
        observe(i, &u_current);
    }

    Ok(GrurvResult {
        u_current,
        v,
        r_list,
        exponents: chain.exponents(),
    })
}

/// `R₁^{m₁} ⋯ R_k^{m_k}`, accumulated right to left; inverse factors are
/// applied by back substitution.
pub fn assemble_r(result: &GrurvResult) -> Result<Matrix> {
    let n = result.v.rows();
    let mut acc: Option<Matrix> = None;
    for (i, (r, exp)) in result.r_list.iter().zip(&result.exponents).enumerate().rev() {
        acc = Some(match (exp, acc) {
            (Exponent::Plus, None) => r.clone(),
            (Exponent::Plus, Some(p)) => r.matmul(&p)?,
            (Exponent::Minus, p) => {
                let rhs = p.unwrap_or_else(|| Matrix::identity(n));
                solve_upper_triangular(r, &rhs).map_err(|e| match e {
                    Error::Singular { value, .. } => Error::SingularFactor { factor: i, ratio: value },
                    other => other,
                })?
            }
        });
    }
    let mut out = acc.ok_or(Error::Empty("assemble_r"))?;
    out.zero_below_diagonal();
    Ok(out)
}

impl GrurvResult {
    /// `U · R · V` with `R` from [`assemble_r`].
    pub fn reconstruct(&self) -> Result<Matrix> {
        self.u_current.matmul(&assemble_r(self)?)?.matmul(&self.v)
    }
}

/// Rank-revealing metrics of the implicit product, measured on the assembled `R`.
pub fn implicit_rank_metrics(result: &GrurvResult, sigma: &[f64], split: usize) -> Result<RankMetrics> {
    rank_reveal_metrics(sigma, &assemble_r(result)?, split)
}
