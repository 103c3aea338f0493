//! Experiment orchestration: grids of RURV/GRURV trials on synthesized
//! matrices, Monte Carlo studies of the Haar corner, and report files.
//!
//! Trial `t` of grid point `g` draws everything from stream `(g << 32) | t` of
//! the configured seed, and results are collected in trial order, so output
//! files are bit-identical for any worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::bounds::{
    deterministic_bounds, density_cdf_many, tail_probability_bound, theorem_bounds, BoundSet, DensityParams,
    DeterministicBounds,
};
use crate::dense::{orthogonality_defect, Matrix};
use crate::error::{Error, Result};
use crate::grurv::{assemble_r, grurv, Exponent, FactorChain};
use crate::haar::{sample_corner_smin, sample_haar_orthogonal, SeededRng};
use crate::metrics::{backward_error, rank_reveal_metrics, summarize, Summary, TrialRecord};
use crate::rurv::rurv;
use crate::spectrum::{realize_spectrum, synthesize_matrix, SpectrumKind, SpectrumSpec, DEFAULT_TOP};

/// Relative slack for the deterministic envelopes.
pub const ENVELOPE_SLACK: f64 = 1e-8;
pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    VaryGap,
    VaryDim,
    Single,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vary-gap" => Ok(Mode::VaryGap),
            "vary-dim" => Ok(Mode::VaryDim),
            "single" => Ok(Mode::Single),
            other => Err(Error::Parse(format!("unknown mode {other:?} (vary-gap|vary-dim|single)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parse(format!("unknown format {other:?} (csv|json)"))),
        }
    }
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

/// Experiment definition; every field has a default so a config file may be partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dist: SpectrumKind,
    /// one dimension, or a list for vary-dim; defaults depend on the mode
    #[serde(deserialize_with = "one_or_many")]
    pub n: Option<Vec<usize>>,
    /// split index; `n / 2` when absent
    pub r: Option<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub gap: Option<Vec<f64>>,
    /// σ₁ of the logspace distribution
    pub top: f64,
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
    pub percentile: f64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// worker threads; all available cores when absent
    pub jobs: Option<usize>,
    /// also write plotdata.svg
    pub plot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Single,
            dist: SpectrumKind::Stair,
            n: None,
            r: None,
            gap: None,
            top: DEFAULT_TOP,
            trials: 200,
            delta: 0.03,
            seed: 42,
            percentile: 0.97,
            output: None,
            format: OutputFormat::Csv,
            jobs: None,
            plot: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: u32,
    pub n: usize,
    pub r: usize,
    pub gap: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn dims(&self) -> Vec<usize> {
        self.n.clone().unwrap_or_else(|| match self.mode {
            Mode::VaryDim => vec![100, 300, 500],
            _ => vec![300],
        })
    }

    fn gaps(&self) -> Vec<f64> {
        self.gap.clone().unwrap_or_else(|| match self.mode {
            Mode::VaryGap => vec![1e1, 1e4, 1e7, 1e10],
            _ => vec![1e7],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return bad(format!("percentile must lie in (0,1], got {}", self.percentile));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if self.trials > u32::MAX as usize {
            return bad("too many trials".into());
        }
        let (dims, gaps) = (self.dims(), self.gaps());
        if dims.is_empty() || gaps.is_empty() {
            return bad("n and gap lists must be nonempty".into());
        }
        match self.mode {
            Mode::Single if dims.len() != 1 || gaps.len() != 1 => {
                return bad("single mode takes one n and one gap".into())
            }
            Mode::VaryGap if dims.len() != 1 => return bad("vary-gap fixes a single n".into()),
            Mode::VaryDim if gaps.len() != 1 => return bad("vary-dim fixes a single gap".into()),
            _ => {}
        }
        for &n in &dims {
            let r = self.r.unwrap_or(n / 2);
            if n < 2 || r == 0 || r >= n {
                return bad(format!("need 1 <= r < n, got n = {n}, r = {r}"));
            }
        }
        Ok(())
    }

    /// Grid points in n-major order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let gaps = self.gaps();
        let mut out = Vec::new();
        for n in self.dims() {
            for &gap in &gaps {
                out.push(GridPoint {
                    index: out.len() as u32,
                    n,
                    r: self.r.unwrap_or(n / 2),
                    gap,
                });
            }
        }
        out
    }

    fn spectrum_spec(&self, p: &GridPoint) -> SpectrumSpec {
        SpectrumSpec {
            kind: self.dist,
            n: p.n,
            r: p.r,
            gap: p.gap,
            top: self.top,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

/// Factor pattern for product experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSpec {
    pub exponents: Vec<Exponent>,
    /// target condition number of each factor
    pub factor_cond: f64,
    /// explicit-product oracle on every `oracle_every`-th trial (when n ≤ `oracle_max_n`)
    pub oracle_every: usize,
    pub oracle_max_n: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            exponents: vec![Exponent::Plus, Exponent::Minus],
            factor_cond: 1e3,
            oracle_every: 10,
            oracle_max_n: 25,
        }
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.exponents.is_empty() {
            return Err(Error::Config("exponent pattern must be nonempty".into()));
        }
        if !(self.factor_cond >= 1.0) {
            return Err(Error::Config(format!("factor_cond must be >= 1, got {}", self.factor_cond)));
        }
        if self.oracle_every == 0 {
            return Err(Error::Config("oracle_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub message: String,
    pub exit_code: i32,
}

impl From<Error> for GridFailure {
    fn from(e: Error) -> Self {
        Self {
            exit_code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

/// Everything measured at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub point: GridPoint,
    pub spectrum: Vec<f64>,
    pub bounds: Option<BoundSet>,
    pub deterministic: Option<DeterministicBounds>,
    pub records: Vec<TrialRecord>,
    pub summary: Option<Summary>,
    /// trials that broke one of the deterministic envelopes
    pub envelope_violations: usize,
    /// `(trial, relative error)` against the explicit product, for product experiments
    pub oracle_errors: Vec<(usize, f64)>,
    pub failure: Option<GridFailure>,
}

/// The per-grid-point part of a report that goes to summary.{csv,json}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid_index: u32,
    pub dist: SpectrumKind,
    pub n: usize,
    pub r: usize,
    pub gap: f64,
    pub trials: usize,
    pub summary: Option<Summary>,
    pub bounds: Option<BoundSet>,
    pub deterministic: Option<DeterministicBounds>,
    pub envelope_violations: usize,
    pub max_oracle_error: Option<f64>,
    pub failure: Option<GridFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dist: SpectrumKind,
    pub percentile: f64,
    pub points: Vec<GridResult>,
}

impl ExperimentReport {
    pub fn summaries(&self) -> Vec<GridSummary> {
        self.points
            .iter()
            .map(|g| GridSummary {
                grid_index: g.point.index,
                dist: self.dist,
                n: g.point.n,
                r: g.point.r,
                gap: g.point.gap,
                trials: g.records.len(),
                summary: g.summary.clone(),
                bounds: g.bounds.clone(),
                deterministic: g.deterministic,
                envelope_violations: g.envelope_violations,
                max_oracle_error: g.oracle_errors.iter().map(|e| e.1).reduce(f64::max),
                failure: g.failure.clone(),
            })
            .collect()
    }

    /// 0 when every grid point completed, else the most severe failure code.
    pub fn exit_code(&self) -> i32 {
        self.points
            .iter()
            .filter_map(|g| g.failure.as_ref().map(|f| f.exit_code))
            .max()
            .unwrap_or(0)
    }
}

/// Number of envelope checks `record` fails (interlacing halves and the three
/// deterministic bounds), each with relative slack [`ENVELOPE_SLACK`].
pub fn envelope_violations(record: &TrialRecord, det: &DeterministicBounds) -> usize {
    if record.flagged {
        return 0;
    }
    let above = |x: f64, b: f64| x > b * (1.0 + ENVELOPE_SLACK);
    [
        record.ratio1 < 1.0 - ENVELOPE_SLACK,
        record.ratio2 < 1.0 - ENVELOPE_SLACK,
        above(record.ratio1, det.d1),
        above(record.ratio2, det.d2),
        above(record.norm3, det.d3),
    ]
    .iter()
    .filter(|&&b| b)
    .count()
}

type TrialOutput = (TrialRecord, Option<f64>);

fn run_grid<F>(cfg: &ExperimentConfig, trial_fn: F) -> Result<ExperimentReport>
where
    F: Fn(&GridPoint, &[f64], u32) -> Result<TrialOutput> + Sync,
{
    cfg.validate()?;
    let pool = cfg.pool()?;
    let mut points = Vec::new();
    for p in cfg.grid() {
        let mut g = GridResult {
            point: p,
            spectrum: Vec::new(),
            bounds: theorem_bounds(p.r, p.n, cfg.delta, Some(p.gap)).ok(),
            deterministic: None,
            records: Vec::new(),
            summary: None,
            envelope_violations: 0,
            oracle_errors: Vec::new(),
            failure: None,
        };
        let outcome = (|| -> Result<()> {
            g.spectrum = realize_spectrum(&cfg.spectrum_spec(&p))?;
            let det = deterministic_bounds(&g.spectrum, p.r)?;
            g.deterministic = Some(det);
            let spectrum = &g.spectrum;
            let outputs: Vec<TrialOutput> = pool.install(|| {
                (0..cfg.trials as u32)
                    .into_par_iter()
                    .map(|t| trial_fn(&p, spectrum, t))
                    .collect::<Result<_>>()
            })?;
            for (rec, oracle) in outputs {
                g.envelope_violations += usize::from(envelope_violations(&rec, &det) > 0);
                if let Some(e) = oracle {
                    g.oracle_errors.push((rec.trial, e));
                }
                g.records.push(rec);
            }
            g.summary = Some(summarize(&g.records, g.bounds.as_ref(), cfg.percentile)?);
            Ok(())
        })();
        if let Err(e) = outcome {
            g.failure = Some(e.into());
        }
        points.push(g);
    }
    Ok(ExperimentReport {
        dist: cfg.dist,
        percentile: cfg.percentile,
        points,
    })
}

/// RURV on synthesized matrices over the configured grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_grid(cfg, |p, sigma, t| {
        let mut rng = SeededRng::for_trial(cfg.seed, p.index, t);
        let a = synthesize_matrix(sigma, &mut rng)?;
        let res = rurv(&a, &mut rng)?;
        let m = rank_reveal_metrics(sigma, &res.r, p.r)?;
        let rec = TrialRecord::new(
            t as usize,
            m,
            backward_error(&a, &res.u, &res.r, &res.v)?,
            orthogonality_defect(&res.u),
            orthogonality_defect(&res.v),
        );
        Ok((rec, None))
    })
}

/// A product chain whose product is exactly `W₀·diag(σ)·W_kᵀ`.
#[derive(Debug, Clone)]
pub struct SyntheticChain {
    pub chain: FactorChain,
    /// `Aᵢ^{mᵢ}` in explicit form, known from the construction
    pub powers: Vec<Matrix>,
    pub product: Matrix,
}

/// Builds `Aᵢ^{mᵢ} = W_{i−1}·Sᵢ·W_iᵀ` with Haar `Wᵢ` and diagonal `Sᵢ` whose
/// product is `diag(σ)`. Each `Sᵢ` is `σ^{1/k}` times a random factor
/// `exp(ηᵢ)` with `Σηᵢ = 0`, sized so that `cond(Sᵢ) ≤ max(factor_cond, cond(σ)^{1/k})`.
/// Inverted factors are assembled from the inverted diagonal, so no
/// general inverse is ever computed. For k = 1 this draws exactly what
/// [`synthesize_matrix`] draws.
pub fn synthesize_chain(
    sigma: &[f64],
    exponents: &[Exponent],
    factor_cond: f64,
    rng: &mut SeededRng,
) -> Result<SyntheticChain> {
    let (n, k) = (sigma.len(), exponents.len());
    if n == 0 || k == 0 {
        return Err(Error::Empty("synthesize_chain"));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Constraint("singular values must be positive and finite".into()));
    }
    let w: Vec<Matrix> = (0..=k).map(|_| sample_haar_orthogonal(n, rng).into_matrix()).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let smin = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    let base_cond = (smax / smin).powf(1.0 / k as f64);
    let h = if k > 1 {
        (factor_cond / base_cond).max(1.0).ln() / (2.0 * (k - 1) as f64)
    } else {
        0.0
    };
    let mut eta = vec![vec![0.0; n]; k];
    if h > 0.0 {
        for j in 0..n {
            let mut total = 0.0;
            for row in eta.iter_mut().take(k - 1) {
                row[j] = h * (2.0 * rng.uniform() - 1.0);
                total += row[j];
            }
            eta[k - 1][j] = -total;
        }
    }
    let mut factors = Vec::with_capacity(k);
    let mut powers = Vec::with_capacity(k);
    for (i, &e) in exponents.iter().enumerate() {
        let s: Vec<f64> = if k == 1 {
            sigma.to_vec()
        } else {
            sigma.iter().zip(&eta[i]).map(|(x, y)| x.powf(1.0 / k as f64) * y.exp()).collect()
        };
        let power = w[i].scale_columns(&s)?.matmul_transpose(&w[i + 1])?;
        let factor = match e {
            Exponent::Plus => power.clone(),
            Exponent::Minus => {
                let inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
                w[i + 1].scale_columns(&inv)?.matmul_transpose(&w[i])?
            }
        };
        factors.push((factor, e));
        powers.push(power);
    }
    let product = if k == 1 {
        powers[0].clone()
    } else {
        w[0].scale_columns(sigma)?.matmul_transpose(&w[k])?
    };
    Ok(SyntheticChain {
        chain: FactorChain::new(factors)?,
        powers,
        product,
    })
}

/// GRURV on synthesized chains; metrics are taken on the assembled `R` and
/// the backward error against `W₀·diag(σ)·W_kᵀ`.
pub fn run_grurv_experiment(cfg: &ExperimentConfig, chain: &ChainSpec) -> Result<ExperimentReport> {
    chain.validate()?;
    run_grid(cfg, |p, sigma, t| {
        let mut rng = SeededRng::for_trial(cfg.seed, p.index, t);
        let syn = synthesize_chain(sigma, &chain.exponents, chain.factor_cond, &mut rng)?;
        let res = grurv(&syn.chain, &mut rng)?;
        let r = assemble_r(&res)?;
        let m = rank_reveal_metrics(sigma, &r, p.r)?;
        let rec = TrialRecord::new(
            t as usize,
            m,
            backward_error(&syn.product, &res.u_current, &r, &res.v)?,
            orthogonality_defect(&res.u_current),
            orthogonality_defect(&res.v),
        );
        let oracle = if p.n <= chain.oracle_max_n && t as usize % chain.oracle_every == 0 {
            let mut explicit = syn.powers[0].clone();
            for f in &syn.powers[1..] {
                explicit = explicit.matmul(f)?;
            }
            Some(backward_error(&explicit, &res.u_current, &r, &res.v)?)
        } else {
            None
        };
        Ok((rec, oracle))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub r: usize,
    pub n: usize,
    pub trials: usize,
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub jobs: Option<usize>,
    /// skip the tail-bound comparison
    pub no_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub delta: f64,
    /// `δ/√(r(n−r))`
    pub threshold: f64,
    pub hits: usize,
    pub empirical: f64,
    pub bound: Option<f64>,
    /// `bound + 3√(bound/N)`
    pub allowed: Option<f64>,
    /// 95% normal-approximation half-width of the empirical frequency
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub rows: Vec<McRow>,
    /// smallest singular value of the corner, per trial
    pub samples: Vec<f64>,
    /// Kolmogorov–Smirnov distance between the squared samples and the density CDF
    pub ks: Option<f64>,
}

/// Samples `s_{r,n}` and tabulates `P[s ≤ δ/√(r(n−r))]` against `min(2.02δ, 1)`.
pub fn run_mc_svalue(cfg: &McConfig) -> Result<McReport> {
    let (r, n) = (cfg.r, cfg.n);
    if r == 0 || r >= n {
        return Err(Error::Config(format!("need 1 <= r < n, got r = {r}, n = {n}")));
    }
    if cfg.trials == 0 || cfg.trials > u32::MAX as usize {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if cfg.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::Config("every delta must lie in (0,1)".into()));
    }
    let opts = ExperimentConfig {
        jobs: cfg.jobs,
        ..Default::default()
    };
    let samples: Vec<f64> = opts.pool()?.install(|| {
        (0..cfg.trials as u32)
            .into_par_iter()
            .map(|t| sample_corner_smin(n, r, &mut SeededRng::for_trial(cfg.seed, 0, t)))
            .collect()
    });
    let total = cfg.trials as f64;
    let scale = ((r * (n - r)) as f64).sqrt();
    let rows = cfg
        .deltas
        .iter()
        .map(|&delta| {
            let threshold = delta / scale;
            let hits = samples.iter().filter(|&&s| s <= threshold).count();
            let empirical = hits as f64 / total;
            let bound = if cfg.no_bound {
                None
            } else {
                tail_probability_bound(r, n, delta).ok()
            };
            McRow {
                delta,
                threshold,
                hits,
                empirical,
                bound,
                allowed: bound.map(|b| b + 3.0 * (b / total).sqrt()),
                ci_halfwidth: 1.96 * (empirical * (1.0 - empirical) / total).sqrt(),
            }
        })
        .collect();
    let ks = match DensityParams::for_corner(r, n) {
        Ok(p) => Some(ks_distance(p, &samples)?),
        Err(_) => None,
    };
    Ok(McReport {
        config: cfg.clone(),
        rows,
        samples,
        ks,
    })
}

/// KS distance between the empirical law of `s²` and the density CDF.
pub fn ks_distance(p: DensityParams, samples: &[f64]) -> Result<f64> {
    let mut sq: Vec<f64> = samples.iter().map(|s| s * s).collect();
    sq.sort_by(f64::total_cmp);
    let cdf = density_cdf_many(p, &sq)?;
    let total = sq.len() as f64;
    Ok(cdf
        .iter()
        .enumerate()
        .map(|(i, f)| (f - i as f64 / total).abs().max(((i + 1) as f64 / total - f).abs()))
        .fold(0.0, f64::max))
}

/// Side-by-side table of the probabilistic and deterministic bounds.
pub fn print_bounds(spec: &SpectrumSpec, delta: f64) -> Result<String> {
    let sigma = realize_spectrum(spec)?;
    let det = deterministic_bounds(&sigma, spec.r)?;
    let mut out = String::new();
    let _ = writeln!(out, "n = {}, r = {}, gap = {:e}, delta = {}, dist = {}", spec.n, spec.r, spec.gap, delta, spec.kind);
    let _ = writeln!(out, "{:<34} {:>14}   {:<34} {:>14}", "probabilistic", "value", "deterministic", "value");
    let (rows, note): (Vec<(String, String)>, Option<String>) = match theorem_bounds(spec.r, spec.n, delta, Some(spec.gap)) {
        Ok(b) => {
            let b4 = if b.b4_applicable {
                format!("{:.6e}", b.b4)
            } else {
                "n/a (gap too small)".to_string()
            };
            (
                vec![
                    ("b1  sigma_r/smin(R11)".into(), format!("{:.6e}", b.b1)),
                    ("b2  smax(R22)/sigma_{r+1}".into(), format!("{:.6e}", b.b2)),
                    ("b3  |R11^-1 R12| (any gap)".into(), b.b3.map_or("n/a".into(), |x| format!("{x:.6e}"))),
                    ("b4  |R11^-1 R12| (large gap)".into(), b4),
                ],
                None,
            )
        }
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let det_rows = [
        ("d1  sigma_r/sigma_n", det.d1),
        ("d2  sigma_1/sigma_{r+1}", det.d2),
        ("d3  sigma_1/sigma_n", det.d3),
    ];
    for i in 0..4 {
        let (pl, pv) = rows.get(i).cloned().unwrap_or_default();
        let (dl, dv) = det_rows
            .get(i)
            .map(|(l, v)| (l.to_string(), format!("{v:.6e}")))
            .unwrap_or_default();
        let _ = writeln!(out, "{pl:<34} {pv:>14}   {dl:<34} {dv:>14}");
    }
    if let Some(note) = note {
        let _ = writeln!(out, "probabilistic bounds unavailable: {note}");
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:e}"))
}

/// Writes records.csv, summary.{csv,json}, histogram.csv, spectrum.csv and,
/// if asked, plotdata.svg into `dir`. Returns the paths written.
pub fn emit_report(report: &ExperimentReport, format: OutputFormat, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    if report.points.is_empty() {
        return Err(Error::Empty("emit_report"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &body)?;
        written.push(path);
        Ok(())
    };

    emit("records.csv", records_csv(report))?;
    match format {
        OutputFormat::Csv => emit("summary.csv", summary_csv(report))?,
        OutputFormat::Json => emit("summary.json", summary_json(report)?)?,
    }
    emit("histogram.csv", histogram_csv(report))?;
    emit("spectrum.csv", spectrum_csv(report))?;
    if plot {
        emit("plotdata.svg", plot_svg(report))?;
    }
    Ok(written)
}

pub fn records_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("grid_n,grid_gap,trial,ratio1,ratio2,norm3,backward_error,orth_u,orth_v,flagged\n");
    for g in &report.points {
        for t in &g.records {
            let _ = writeln!(
                out,
                "{},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                g.point.n, g.point.gap, t.trial, t.ratio1, t.ratio2, t.norm3, t.backward_error, t.orth_u, t.orth_v, t.flagged
            );
        }
    }
    out
}

pub fn summary_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(&report.summaries()).map_err(|e| Error::Parse(e.to_string()))
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "grid_index,dist,n,r,gap,metric,count,flagged,min,q1,median,q3,max,percentile,p_hi,bound,exceed_count,envelope_violations,max_backward_error,max_oracle_error,error\n",
    );
    for s in report.summaries() {
        let prefix = format!("{},{},{},{},{:e}", s.grid_index, s.dist, s.n, s.r, s.gap);
        let oracle = fmt_opt(s.max_oracle_error);
        match (&s.summary, &s.failure) {
            (Some(sm), _) => {
                for (name, m) in [("ratio1", &sm.ratio1), ("ratio2", &sm.ratio2), ("norm3", &sm.norm3)] {
                    let _ = writeln!(
                        out,
                        "{prefix},{name},{},{},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{},{},{:e},{oracle},",
                        sm.count,
                        sm.flagged,
                        m.min,
                        m.q1,
                        m.median,
                        m.q3,
                        m.max,
                        sm.percentile,
                        m.p_hi,
                        fmt_opt(m.bound),
                        m.exceed_count,
                        s.envelope_violations,
                        sm.max_backward_error
                    );
                }
            }
            (None, failure) => {
                let msg = failure.as_ref().map_or(String::new(), |f| f.message.replace([',', '\n'], ";"));
                let _ = writeln!(out, "{prefix},,,,,,,,,,,,,,,{oracle},{msg}");
            }
        }
    }
    out
}

/// Counts of `log₁₀ values` in [`HISTOGRAM_BINS`] equal bins spanning the data.
/// Nonpositive and non-finite values are left out. Returns `(lo, hi, count)` per bin.
pub fn log_histogram(values: &[f64]) -> Vec<(f64, f64, usize)> {
    let logs: Vec<f64> = values.iter().filter(|v| **v > 0.0 && v.is_finite()).map(|v| v.log10()).collect();
    if logs.is_empty() {
        return Vec::new();
    }
    let mut lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for x in logs {
        let b = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

pub fn histogram_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("grid_n,grid_gap,metric,log10_lo,log10_hi,count\n");
    for g in &report.points {
        let columns: [(&str, fn(&TrialRecord) -> f64); 3] =
            [("ratio1", |t| t.ratio1), ("ratio2", |t| t.ratio2), ("norm3", |t| t.norm3)];
        for (name, f) in columns {
            let values: Vec<f64> = g.records.iter().filter(|t| !t.flagged).map(f).collect();
            for (lo, hi, c) in log_histogram(&values) {
                let _ = writeln!(out, "{},{:e},{name},{lo:e},{hi:e},{c}", g.point.n, g.point.gap);
            }
        }
    }
    out
}

pub fn spectrum_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("grid_n,grid_gap,index,sigma\n");
    for g in &report.points {
        for (i, s) in g.spectrum.iter().enumerate() {
            let _ = writeln!(out, "{},{:e},{},{s:e}", g.point.n, g.point.gap, i + 1);
        }
    }
    out
}

/// Box plots in log₁₀ scale, one panel per metric, one box per grid point.
pub fn plot_svg(report: &ExperimentReport) -> String {
    let (panel_w, panel_h, pad) = (320.0, 240.0, 30.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">"#,
        3.0 * panel_w,
        panel_h
    );
    let ok: Vec<(&GridResult, &Summary)> = report
        .points
        .iter()
        .filter_map(|g| g.summary.as_ref().map(|s| (g, s)))
        .collect();
    for (panel, name) in ["ratio1", "ratio2", "norm3"].iter().enumerate() {
        let pick = |s: &Summary| match panel {
            0 => s.ratio1.clone(),
            1 => s.ratio2.clone(),
            _ => s.norm3.clone(),
        };
        let stats: Vec<_> = ok.iter().map(|(_, s)| pick(s)).collect();
        let logs = |x: f64| if x > 0.0 { x.log10() } else { -16.0 };
        let mut lo = stats.iter().map(|m| logs(m.min)).fold(f64::INFINITY, f64::min);
        let mut hi = stats
            .iter()
            .map(|m| logs(m.max).max(m.bound.map_or(f64::NEG_INFINITY, logs)))
            .fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            lo -= 1.0;
            hi += 1.0;
        }
        let x0 = panel as f64 * panel_w;
        let y = |v: f64| panel_h - pad - (logs(v) - lo) / (hi - lo) * (panel_h - 2.0 * pad);
        let _ = writeln!(out, r#"<g id="{name}"><text x="{}" y="16">{name} (log10)</text>"#, x0 + pad);
        let slot = (panel_w - 2.0 * pad) / stats.len().max(1) as f64;
        for (i, m) in stats.iter().enumerate() {
            let cx = x0 + pad + slot * (i as f64 + 0.5);
            let half = slot * 0.3;
            let _ = writeln!(
                out,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                y(m.min),
                y(m.max)
            );
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="black"/>"#,
                cx - half,
                y(m.q3),
                2.0 * half,
                (y(m.q1) - y(m.q3)).max(0.5)
            );
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="red"/>"#,
                cx - half,
                y(m.median),
                cx + half,
                y(m.median)
            );
            let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="black"/>"#, y(m.p_hi));
            if let Some(b) = m.bound {
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="blue"/>"#,
                    cx - half,
                    y(b),
                    cx + half,
                    y(b)
                );
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Writes mc_table.csv and histogram.csv (log₁₀ of the samples).
pub fn emit_mc_report(report: &McReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut table = String::from("r,n,trials,delta,threshold,hits,empirical,bound,allowed,ci_halfwidth\n");
    for row in &report.rows {
        let _ = writeln!(
            table,
            "{},{},{},{},{:e},{},{:e},{},{},{:e}",
            report.config.r,
            report.config.n,
            report.config.trials,
            row.delta,
            row.threshold,
            row.hits,
            row.empirical,
            fmt_opt(row.bound),
            fmt_opt(row.allowed),
            row.ci_halfwidth
        );
    }
    let mut hist = String::from("log10_lo,log10_hi,count\n");
    for (lo, hi, c) in log_histogram(&report.samples) {
        let _ = writeln!(hist, "{lo:e},{hi:e},{c}");
    }
    let paths = [dir.join("mc_table.csv"), dir.join("histogram.csv")];
    write_file(&paths[0], &table)?;
    write_file(&paths[1], &hist)?;
    Ok(paths.to_vec())
}

/// Parses the matrix text format: `rows cols`, then row-major entries.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad {what}")))
    };
    let (rows, cols) = (dim("row count")?, dim("column count")?);
    let data: Vec<f64> = tokens
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad entry {t:?}"))))
        .collect::<Result<_>>()?;
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    Matrix::new(rows, cols, data)
}

/// 17 significant digits, so that [`parse_matrix`] round-trips exactly.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_file(path, &format_matrix(m))
}
