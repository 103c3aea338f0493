//! Closed-form probabilistic machinery for RURV.
//!
//! * the density of `s²`, where `s` is the smallest singular value of the
//!   leading r×r block of an n×n Haar orthogonal matrix, with its constant
//!   and the Gauss hypergeometric factor it carries;
//! * the tail bound `P[s ≤ δ/√(r(n−r))] ≤ 2.02·δ` (valid for r, n−r > 30);
//! * the four bounds on the rank-revealing ratios that hold with
//!   probability 1−δ, and three deterministic envelopes.
//!
//! The density is that of the *squared* variable: for r = 1, n = 3 the
//! corner is |V₁₁|, uniform on [0,1], and the formula reduces to `1/(2√x)`,
//! the density of its square. Gamma ratios are evaluated in log space since
//! Γ((n+1)/2) overflows past n ≈ 340.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_76e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 607/128).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires a finite x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (x + 0.5) * t.ln() - t + HALF_LN_TWO_PI + (sum / x).ln()
}

/// `(ln|Γ(x)|, sign Γ(x))`; `None` at the poles 0, −1, −2, …
fn ln_gamma_signed(x: f64) -> Option<(f64, f64)> {
    if x > 0.0 {
        return Some((ln_gamma_pos(x), 1.0));
    }
    if x == x.floor() {
        return None;
    }
    // reflection: Γ(x)·Γ(1−x) = π / sin(πx)
    let s = (std::f64::consts::PI * x).sin();
    Some((std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma_pos(1.0 - x), s.signum()))
}

/// Parameters `(r, n)` of the corner distribution, with `1 ≤ r < n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityParams {
    r: usize,
    n: usize,
}

impl DensityParams {
    pub fn new(r: usize, n: usize) -> Result<Self> {
        if r == 0 || 2 * r >= n {
            return Err(Error::Domain(format!(
                "corner density needs 1 <= r < n/2, got r = {r}, n = {n}"
            )));
        }
        Ok(Self { r, n })
    }

    /// Accepts any corner size `1 ≤ r < n` except `r = n/2`. For `r > n/2` the
    /// smallest singular value of the r×r corner equals that of the
    /// complementary (n−r)×(n−r) corner, so the problem is reduced to `n − r`.
    pub fn for_corner(r: usize, n: usize) -> Result<Self> {
        if r > n / 2 && r < n && 2 * r != n {
            Self::new(n - r, n)
        } else {
            Self::new(r, n)
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(a, b, c)` of the hypergeometric factor: `((n−r−1)/2, (r−1)/2, (n+1)/2)`.
    pub fn hyp_params(&self) -> (f64, f64, f64) {
        let (r, n) = (self.r as f64, self.n as f64);
        (0.5 * (n - r - 1.0), 0.5 * (r - 1.0), 0.5 * (n - 1.0) + 1.0)
    }

    fn ln_normalization(&self) -> f64 {
        let (r, n) = (self.r as f64, self.n as f64);
        (0.5 * r * (n - r)).ln() + ln_gamma_pos(0.5 * (n - r + 1.0)) + ln_gamma_pos(0.5 * (r + 1.0))
            - ln_gamma_pos(0.5)
            - ln_gamma_pos(0.5 * (n + 1.0))
    }
}

/// `c_{r,n} = ½r(n−r)·Γ(½(n−r+1))·Γ(½(r+1)) / (Γ(½)·Γ(½(n+1)))`.
///
/// Underflows to zero for balanced corners beyond n ≈ 2200; use
/// [`ln_normalization_constant`] there.
pub fn normalization_constant(p: DensityParams) -> f64 {
    p.ln_normalization().exp()
}

pub fn ln_normalization_constant(p: DensityParams) -> f64 {
    p.ln_normalization()
}

const SERIES_MAX_TERMS: usize = 1_000_000;
const RESCALE: f64 = 1e200;

/// `ln ₂F₁(a, b; c; z)` by the Gauss series, for `0 ≤ z < 1` and a series of
/// eventually one sign. Running sums are rescaled to survive huge parameters.
fn ln_gauss_series(a: f64, b: f64, c: f64, z: f64) -> Result<(f64, f64)> {
    let (mut sum, mut term, mut ln_scale) = (1.0_f64, 1.0_f64, 0.0_f64);
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        term *= ratio;
        sum += term;
        if sum.abs() > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_scale += RESCALE.ln();
        }
        if term == 0.0 || (ratio.abs() < 1.0 && term.abs() <= 1e-17 * sum.abs()) {
            return Ok((sum.abs().ln() + ln_scale, sum.signum()));
        }
    }
    Err(Error::SeriesConvergence {
        terms: SERIES_MAX_TERMS,
    })
}

/// `ln ₂F₁(a, b; c; z)` with `w = 1 − z` passed separately so that small `w`
/// keeps full precision. Requires `a, b ≥ 0`, `c > 0`, `c − a − b > 0` and
/// not an integer.
fn ln_hyp2f1(a: f64, b: f64, c: f64, z: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) || !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("hypergeometric argument must lie in [0,1], got {z}")));
    }
    if a < 0.0 || b < 0.0 || c <= 0.0 {
        return Err(Error::Domain(format!("unsupported parameters a = {a}, b = {b}, c = {c}")));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let s = c - a - b;
    if !(s > 0.0) || s == s.floor() {
        return Err(Error::Domain(format!(
            "c − a − b must be positive and non-integral, got {s}"
        )));
    }
    let ln_at_one = ln_gamma_pos(c) + ln_gamma_pos(s) - ln_gamma_pos(c - a) - ln_gamma_pos(c - b);
    if w == 0.0 {
        return Ok(ln_at_one);
    }
    if z <= 0.5 {
        return Ok(ln_gauss_series(a, b, c, z)?.0);
    }

    // F(a,b;c;z) = Γ(c)Γ(s)/(Γ(c−a)Γ(c−b))·F(a,b;1−s;w)
    //            + w^s·Γ(c)Γ(−s)/(Γ(a)Γ(b))·F(c−a,c−b;1+s;w)
    let (ln_f1, sign_f1) = ln_gauss_series(a, b, 1.0 - s, w)?;
    let (ln_f2, sign_f2) = ln_gauss_series(c - a, c - b, 1.0 + s, w)?;
    let (ln_g_neg_s, sign_g) = ln_gamma_signed(-s).expect("s is not an integer");
    let ln_t1 = ln_at_one + ln_f1;
    let ln_t2 = s * w.ln() + ln_gamma_pos(c) + ln_g_neg_s - ln_gamma_pos(a) - ln_gamma_pos(b) + ln_f2;
    let (s1, s2) = (sign_f1, sign_g * sign_f2);
    let top = ln_t1.max(ln_t2);
    let t1 = s1 * (ln_t1 - top).exp();
    let t2 = s2 * (ln_t2 - top).exp();
    let total = t1 + t2;
    // heavy cancellation: the positive-term series on z is slower but exact in sign
    if !(total > 0.0) || total < 1e-3 * (t1.abs() + t2.abs()) {
        if z < 1.0 {
            return Ok(ln_gauss_series(a, b, c, z)?.0);
        }
        return Ok(ln_at_one);
    }
    Ok(top + total.ln())
}

/// Gauss hypergeometric `₂F₁(a, b; c; 1 − x)` for `x ∈ [0, 1]`.
///
/// Intended for the corner-density family where `c − a − b = 3/2`: the plain
/// series is used for `1 − x ≤ 1/2`, and the linear transformation to
/// argument `x` above that. At `x = 0` (argument 1) the closed form
/// `Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b))` is returned.
pub fn hyp2f1_near_one(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0,1], got {x}")));
    }
    Ok(ln_hyp2f1(a, b, c, 1.0 - x, x)?.exp())
}

fn ln_density_s2(p: DensityParams, x: f64) -> Result<f64> {
    let (r, n) = (p.r as f64, p.n as f64);
    let (a, b, c) = p.hyp_params();
    let power = 0.5 * r * (n - r) - 1.0;
    let ln_power = if power == 0.0 { 0.0 } else { power * (-x).ln_1p() };
    Ok(p.ln_normalization() - 0.5 * x.ln() + ln_power + ln_hyp2f1(a, b, c, 1.0 - x, x)?)
}

/// Density of `s²` at `x ∈ (0, 1)`:
/// `c_{r,n} · x^{−1/2} · (1−x)^{r(n−r)/2 − 1} · ₂F₁((n−r−1)/2, (r−1)/2; (n+1)/2; 1−x)`.
pub fn density_s2(p: DensityParams, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("density argument must lie in (0,1), got {x}")));
    }
    Ok(ln_density_s2(p, x)?.exp())
}

/// `2t · f(t²)`, the density of `s` itself; bounded on [0,1] unlike `f`.
fn density_s(p: DensityParams, t: f64) -> Result<f64> {
    if t <= 0.0 {
        // limit of 2t·c·t⁻¹·F(a,b;c;1) as t → 0
        let (a, b, c) = p.hyp_params();
        return Ok(2.0 * (p.ln_normalization() + ln_hyp2f1(a, b, c, 1.0, 0.0)?).exp());
    }
    if t >= 1.0 {
        return Ok(if 0.5 * (p.r * (p.n - p.r)) as f64 - 1.0 == 0.0 {
            2.0 * normalization_constant(p)
        } else {
            0.0
        });
    }
    Ok(2.0 * t * density_s2(p, t * t)?)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn step(
        f: &dyn Fn(f64) -> Result<f64>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    if b <= a {
        return Ok(0.0);
    }
    let (fa, fm, fb) = (f(a)?, f(0.5 * (a + b))?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `P[s² ≤ x]`, by adaptive Simpson on the substitution `x = t²`.
pub fn density_cdf(p: DensityParams, x: f64) -> Result<f64> {
    Ok(density_cdf_many(p, &[x])?[0])
}

/// CDF of `s²` at each point of `xs` (any order), integrating once across the sorted points.
pub fn density_cdf_many(p: DensityParams, xs: &[f64]) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let f = |t: f64| density_s(p, t);
    let mut out = vec![0.0; xs.len()];
    let (mut acc, mut prev) = (0.0, 0.0);
    for i in order {
        let t = xs[i].clamp(0.0, 1.0).sqrt();
        acc += adaptive_simpson(&f, prev, t, 1e-12)?;
        prev = t;
        out[i] = acc.min(1.0);
    }
    Ok(out)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")))
    }
}

fn check_large_blocks(r: usize, n: usize) -> Result<()> {
    if r > 30 && n > r && n - r > 30 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "the bound requires r > 30 and n − r > 30, got r = {r}, n = {n}"
        )))
    }
}

/// `min(2.02·δ, 1)`, the bound on `P[s_{r,n} ≤ δ/√(r(n−r))]`.
pub fn tail_probability_bound(r: usize, n: usize, delta: f64) -> Result<f64> {
    check_large_blocks(r, n)?;
    check_delta(delta)?;
    Ok((2.02 * delta).min(1.0))
}

/// Bounds that hold jointly with probability at least 1 − δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub delta: f64,
    pub r: usize,
    pub n: usize,
    pub gap: Option<f64>,
    /// bound on σ_r / σ_min(R₁₁)
    pub b1: f64,
    /// bound on σ_max(R₂₂) / σ_{r+1}
    pub b2: f64,
    /// bound on ‖R₁₁⁻¹R₁₂‖₂ for any gap; needs the gap
    pub b3: Option<f64>,
    /// sharper bound on ‖R₁₁⁻¹R₁₂‖₂, valid only when `b4_applicable`
    pub b4: f64,
    pub b4_applicable: bool,
}

impl BoundSet {
    /// The bound that applies to ‖R₁₁⁻¹R₁₂‖₂: `b4` when applicable, else `b3`.
    pub fn norm3_bound(&self) -> Option<f64> {
        if self.b4_applicable {
            Some(self.b4)
        } else {
            self.b3
        }
    }
}

pub fn theorem_bounds(r: usize, n: usize, delta: f64, gap: Option<f64>) -> Result<BoundSet> {
    check_large_blocks(r, n)?;
    check_delta(delta)?;
    if let Some(g) = gap {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Domain(format!("gap must be positive and finite, got {g}")));
        }
    }
    let root = ((r * (n - r)) as f64).sqrt();
    let b1 = 2.02 / delta * root;
    let b3 = gap.map(|g| 6.1 * root / delta + 50.0 * root.powi(3) / (g * delta.powi(3)));
    let b4 = 4.04 / delta * root + 1.0;
    let b4_applicable = gap.is_some_and(|g| delta > std::f64::consts::SQRT_2 * 1.01 * n as f64 / g);
    Ok(BoundSet {
        delta,
        r,
        n,
        gap,
        b1,
        b2: b1,
        b3,
        b4,
        b4_applicable,
    })
}

/// Envelopes that hold on every run: `σ_r/σ_n`, `σ₁/σ_{r+1}`, `σ₁/σ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicBounds {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DeterministicBounds {
    /// True when `σ_n = 0` made some envelope infinite.
    pub fn is_infinite(&self) -> bool {
        !(self.d1.is_finite() && self.d2.is_finite() && self.d3.is_finite())
    }
}

pub fn deterministic_bounds(spectrum: &[f64], r: usize) -> Result<DeterministicBounds> {
    let n = spectrum.len();
    if r == 0 || r >= n {
        return Err(Error::Domain(format!("split index must satisfy 1 <= r < n, got r = {r}, n = {n}")));
    }
    if spectrum.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || spectrum.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Domain("spectrum must be nonnegative and nonincreasing".into()));
    }
    let div = |a: f64, b: f64| if b == 0.0 { f64::INFINITY } else { a / b };
    let (s1, sr, sr1, sn) = (spectrum[0], spectrum[r - 1], spectrum[r], spectrum[n - 1]);
    Ok(DeterministicBounds {
        d1: div(sr, sn),
        d2: div(s1, sr1),
        d3: div(s1, sn),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ln Γ(k) and ln Γ(k + 1/2) for integer k, from sums of logs of integers.
    fn ln_gamma_int(k: u32) -> f64 {
        (1..k).map(|i| (i as f64).ln()).sum()
    }

    fn ln_gamma_half(k: u32) -> f64 {
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let ln_fact = |m: u32| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
        ln_fact(2 * k) + 0.5 * std::f64::consts::PI.ln() - k as f64 * 4f64.ln() - ln_fact(k)
    }

    #[test]
    fn log_gamma_reference_points() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
        assert!((log_gamma(0.5).unwrap() - 0.572_364_942_924_700_1).abs() < 1e-12);
        assert!((log_gamma(10.0).unwrap() - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_gamma_against_exact_sums() {
        for k in 1..=170 {
            let got = log_gamma(k as f64).unwrap();
            let want = ln_gamma_int(k);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "k = {k}: {got} vs {want}");
        }
        for k in 0..=300 {
            let got = log_gamma(k as f64 + 0.5).unwrap();
            let want = ln_gamma_half(k);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "k = {k}");
        }
    }

    #[test]
    fn log_gamma_large_argument_relative() {
        let want: f64 = (1..10_000u32).map(|i| (i as f64).ln()).sum();
        let got = log_gamma(10_000.0).unwrap();
        assert!((got - want).abs() / want < 1e-14);
    }

    #[test]
    fn log_gamma_domain() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
        // below 1/2 via the recurrence
        assert!((log_gamma(0.25).unwrap() - 1.288_022_524_698_077_5).abs() < 1e-13);
    }

    #[test]
    fn signed_gamma_reflection() {
        let (ln, sign) = ln_gamma_signed(-1.5).unwrap();
        assert_eq!(sign, 1.0);
        let want = 4.0 * std::f64::consts::PI.sqrt() / 3.0;
        assert!((ln.exp() - want).abs() < 1e-14);
        let (_, sign) = ln_gamma_signed(-0.5).unwrap();
        assert_eq!(sign, -1.0);
        assert!(ln_gamma_signed(-2.0).is_none());
    }

    #[test]
    fn normalization_small_cases() {
        let c = normalization_constant(DensityParams::new(1, 3).unwrap());
        assert!((c - 0.5).abs() < 1e-14);
        // exact: 4·Γ(5/2)Γ(3/2)/(Γ(1/2)Γ(7/2)) = 4/5
        let c = normalization_constant(DensityParams::new(2, 6).unwrap());
        assert!((c - 0.8).abs() / 0.8 < 1e-12);
    }

    #[test]
    fn normalization_positive_and_finite_on_grid() {
        for n in (3usize..=4000).step_by(97) {
            for r in (1..n.div_ceil(2)).step_by(41) {
                let p = DensityParams::new(r, n).unwrap();
                assert!(ln_normalization_constant(p).is_finite(), "r = {r}, n = {n}");
                // balanced corners past n ≈ 2200 fall below the smallest double
                if n <= 2000 {
                    let c = normalization_constant(p);
                    assert!(c.is_finite() && c > 0.0, "r = {r}, n = {n}");
                }
            }
        }
    }

    #[test]
    fn density_params_domain() {
        assert!(DensityParams::new(0, 5).is_err());
        assert!(DensityParams::new(3, 6).is_err());
        assert!(DensityParams::new(2, 5).is_ok());
        assert_eq!(DensityParams::for_corner(7, 10).unwrap().r(), 3);
        assert!(DensityParams::for_corner(5, 10).is_err());
    }

    #[test]
    fn hyp2f1_trivial_cases() {
        // r = 1 ⇒ b = 0, terminating series
        for &x in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(hyp2f1_near_one(3.0, 0.0, 4.5, x).unwrap(), 1.0);
        }
        assert_eq!(hyp2f1_near_one(2.0, 1.5, 5.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn hyp2f1_at_one_closed_form_vs_series() {
        for r in 2..=6usize {
            for n in 8..=20usize {
                if 2 * r >= n {
                    continue;
                }
                let (a, b, c) = DensityParams::new(r, n).unwrap().hyp_params();
                let closed = hyp2f1_near_one(a, b, c, 0.0).unwrap();
                // partial sums of the positive series at argument 1 converge like k^{-3/2}:
                // sum enough terms and add the integral estimate of the tail
                let mut term = 1.0_f64;
                let mut sum = 1.0_f64;
                let kmax = 2_000_000usize;
                for k in 0..kmax {
                    let kf = k as f64;
                    term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
                    sum += term;
                }
                // term_k ~ C k^{-5/2}; tail Σ_{j>K} ≈ term_K · K / (3/2)
                sum += term * kmax as f64 / 1.5;
                assert!((closed - sum).abs() / closed < 1e-9, "r = {r}, n = {n}: {closed} vs {sum}");
            }
        }
    }

    #[test]
    fn hyp2f1_transformation_matches_direct_series() {
        // for 1 − x > 1/2 compare the transformed evaluation with the positive direct series
        for &(r, n) in &[(2usize, 9usize), (3, 10), (10, 40), (35, 80), (100, 300)] {
            let (a, b, c) = DensityParams::new(r, n).unwrap().hyp_params();
            for &x in &[0.45, 0.2, 0.05, 0.01, 1e-3] {
                let via_transform = hyp2f1_near_one(a, b, c, x).unwrap();
                let direct = ln_gauss_series(a, b, c, 1.0 - x).unwrap().0.exp();
                let err = (via_transform - direct).abs() / direct;
                assert!(err < 1e-10, "r = {r}, n = {n}, x = {x}: rel err {err:e}");
            }
        }
    }

    #[test]
    fn hyp2f1_domain_errors() {
        assert!(hyp2f1_near_one(1.0, 1.0, 2.5, -0.1).is_err());
        assert!(hyp2f1_near_one(1.0, 1.0, 2.5, 1.1).is_err());
        // c − a − b = 1 is an integer: transformation undefined
        assert!(hyp2f1_near_one(1.0, 1.0, 3.0, 0.1).is_err());
    }

    #[test]
    fn density_first_coordinate_case() {
        let p = DensityParams::new(1, 3).unwrap();
        for &x in &[0.01f64, 0.25, 0.81, 0.5] {
            let want = 1.0 / (2.0 * x.sqrt());
            assert!((density_s2(p, x).unwrap() - want).abs() <= 1e-10 * want);
        }
        assert!(density_s2(p, 0.0).is_err());
        assert!(density_s2(p, 1.0).is_err());
    }

    #[test]
    fn density_envelope() {
        let p = DensityParams::new(35, 80).unwrap();
        for &x in &[1e-4, 0.01, 0.05] {
            let f = density_s2(p, x).unwrap();
            assert!(f <= 1.01 * ((35.0 * 45.0) as f64).sqrt() / x.sqrt(), "x = {x}: {f}");
        }
    }

    #[test]
    fn cdf_of_uniform_corner() {
        let p = DensityParams::new(1, 3).unwrap();
        for &x in &[0.0, 0.04, 0.25, 0.64, 1.0] {
            assert!((density_cdf(p, x).unwrap() - x.sqrt()).abs() < 1e-9);
        }
        let many = density_cdf_many(p, &[0.64, 0.04, 0.25]).unwrap();
        for (got, want) in many.iter().zip([0.8, 0.2, 0.5]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_bound_values() {
        assert!((tail_probability_bound(40, 80, 0.03).unwrap() - 0.0606).abs() < 1e-15);
        assert_eq!(tail_probability_bound(40, 80, 0.6).unwrap(), 1.0);
        assert!(tail_probability_bound(31, 62, 0.1).is_ok());
        let err = tail_probability_bound(30, 62, 0.1).unwrap_err();
        assert!(err.to_string().contains("r > 30"));
        assert!(tail_probability_bound(40, 80, 0.0).is_err());
        assert!(tail_probability_bound(40, 80, 1.0).is_err());
    }

    #[test]
    fn theorem_bounds_reference_values() {
        let b = theorem_bounds(750, 1500, 0.03, None).unwrap();
        assert!((b.b1 - 50_500.0).abs() < 1e-8);
        assert_eq!(b.b1, b.b2);
        assert!((b.b4 - 101_001.0).abs() < 1e-8);
        assert!(!b.b4_applicable);
        assert!(b.b3.is_none());

        // threshold √2·1.01·1500/0.03 ≈ 7.142e4
        assert!(theorem_bounds(750, 1500, 0.03, Some(1e7)).unwrap().b4_applicable);
        assert!(!theorem_bounds(750, 1500, 0.03, Some(1e3)).unwrap().b4_applicable);
        let threshold = std::f64::consts::SQRT_2 * 1.01 * 1500.0 / 0.03;
        assert!((threshold - 7.142e4).abs() < 5.0);

        let b = theorem_bounds(150, 300, 0.03, Some(1e7)).unwrap();
        let want = 6.1 * 150.0 / 0.03 + 1e-7 * 50.0 * 150f64.powi(3) / 0.03f64.powi(3);
        assert!((b.b3.unwrap() - want).abs() <= 1e-9 * want);
        // 30 500 + 625 000
        assert!((b.b3.unwrap() - 655_500.0).abs() < 1e-6);
        assert_eq!(b.norm3_bound(), Some(b.b4));
    }

    #[test]
    fn theorem_bounds_monotone() {
        let deltas = [0.01, 0.03, 0.1, 0.5];
        for &(r, n) in &[(31usize, 62usize), (50, 100), (150, 300), (500, 2000)] {
            let bs: Vec<_> = deltas.iter().map(|&d| theorem_bounds(r, n, d, None).unwrap()).collect();
            for w in bs.windows(2) {
                assert!(w[1].b1 < w[0].b1 && w[1].b2 < w[0].b2 && w[1].b4 < w[0].b4);
            }
        }
        let sizes = [(31usize, 62usize), (40, 100), (100, 300), (500, 1000)];
        let bs: Vec<_> = sizes.iter().map(|&(r, n)| theorem_bounds(r, n, 0.03, None).unwrap()).collect();
        for w in bs.windows(2) {
            assert!(w[1].b1 > w[0].b1 && w[1].b4 > w[0].b4);
        }
    }

    #[test]
    fn theorem_bounds_domain() {
        assert!(theorem_bounds(30, 100, 0.03, None).is_err());
        assert!(theorem_bounds(50, 80, 0.03, None).is_err());
        assert!(theorem_bounds(50, 100, 1.5, None).is_err());
        assert!(theorem_bounds(50, 100, 0.03, Some(-1.0)).is_err());
    }

    #[test]
    fn deterministic_bound_cases() {
        let stair = [1e4, 1e4, 1e4, 1.0, 1.0, 1.0];
        assert_eq!(
            deterministic_bounds(&stair, 3).unwrap(),
            DeterministicBounds { d1: 1e4, d2: 1e4, d3: 1e4 }
        );
        let ones = [1.0; 5];
        assert_eq!(
            deterministic_bounds(&ones, 2).unwrap(),
            DeterministicBounds { d1: 1.0, d2: 1.0, d3: 1.0 }
        );
        let with_zero = [3.0, 2.0, 0.0];
        let d = deterministic_bounds(&with_zero, 1).unwrap();
        assert!(d.is_infinite() && d.d2 == 1.5);
        assert!(deterministic_bounds(&[1.0, 2.0], 1).is_err());
        assert!(deterministic_bounds(&ones, 5).is_err());
    }
}
