use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rurv::bounds::DensityParams;
use rurv::dense::{jacobi_svd_values, orthogonality_defect, spectral_norm, solve_upper_triangular};
use rurv::grurv::{assemble_r, grurv, Exponent, FactorChain};
use rurv::haar::SeededRng;
use rurv::harness::{
    emit_mc_report, emit_report, print_bounds, read_matrix, run_experiment, run_grurv_experiment, run_mc_svalue,
    summary_json, write_matrix, ChainSpec, ExperimentConfig, ExperimentReport, McConfig, Mode, OutputFormat,
};
use rurv::metrics::{backward_error, MetricSummary};
use rurv::rurv::{rulv, rurv, split_r};
use rurv::spectrum::{SpectrumKind, SpectrumSpec, DEFAULT_TOP};
use rurv::{Error, Result};

#[derive(Parser)]
#[command(name = "rurv", version, about = "Randomized rank-revealing URV factorizations and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One RURV (or RULV) of a matrix read from a file
    Factor(FactorArgs),
    /// GRURV of a product of matrices and inverses read from files
    Grurv(GrurvArgs),
    /// RURV on synthesized matrices over an (n, gap) grid
    Experiment(ExperimentArgs),
    /// GRURV on synthesized products over an (n, gap) grid
    GrurvExperiment(GrurvExperimentArgs),
    /// Monte Carlo study of the smallest singular value of a Haar corner
    McSvalue(McArgs),
    /// Tabulate the probabilistic and deterministic bounds
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct FactorArgs {
    /// matrix file: "rows cols" then row-major entries
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// split index for the block diagnostics
    #[arg(long)]
    r: Option<usize>,
    /// lower-triangular variant
    #[arg(long)]
    ulv: bool,
    /// directory for u.txt, r.txt (or l.txt) and v.txt
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GrurvArgs {
    /// factor files, in product order
    #[arg(long = "factor", required = true)]
    factors: Vec<PathBuf>,
    /// exponent per factor, e.g. "+1,-1,+1"
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    exponents: Vec<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    r: Option<usize>,
    /// directory for u.txt, v.txt, r.txt and r_<i>.txt
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config file; flags given on the command line override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    dist: Option<SpectrumKind>,
    /// dimension or comma-separated list
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    r: Option<usize>,
    /// gap or comma-separated list
    #[arg(long, value_delimiter = ',')]
    gap: Option<Vec<f64>>,
    /// σ₁ of the logspace distribution
    #[arg(long)]
    top: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// also write plotdata.svg
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct GrurvExperimentArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// exponent pattern, e.g. "+1,-1"
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    exponents: Option<Vec<String>>,
    /// target condition number of each factor
    #[arg(long)]
    factor_cond: Option<f64>,
    /// explicit-product check on every k-th trial (n <= 25)
    #[arg(long)]
    oracle_every: Option<usize>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 5000)]
    trials: usize,
    /// comma-separated list
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// sample only, without the tail-bound comparison
    #[arg(long)]
    no_bound: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    /// defaults to n/2
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0.03)]
    delta: f64,
    #[arg(long, default_value_t = 1e7)]
    gap: f64,
    #[arg(long, default_value_t = SpectrumKind::Stair)]
    dist: SpectrumKind,
    #[arg(long, default_value_t = DEFAULT_TOP)]
    top: f64,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.dist {
            c.dist = v;
        }
        if let Some(v) = &self.n {
            c.n = Some(v.clone());
        }
        if let Some(v) = self.r {
            c.r = Some(v);
        }
        if let Some(v) = &self.gap {
            c.gap = Some(v.clone());
        }
        if let Some(v) = self.top {
            c.top = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.percentile {
            c.percentile = v;
        }
        if let Some(v) = self.format {
            c.format = v;
        }
        if let Some(v) = &self.out {
            c.output = Some(v.clone());
        }
        if let Some(v) = self.jobs {
            c.jobs = Some(v);
        }
        c.plot |= self.plot;
        c.validate()?;
        Ok(c)
    }
}

fn parse_exponents(items: &[String]) -> Result<Vec<Exponent>> {
    items.iter().map(|s| s.parse()).collect()
}

fn fmt_bound(m: &MetricSummary) -> String {
    m.bound.map_or("-".into(), |b| format!("{b:.4e}"))
}

fn print_report(report: &ExperimentReport) {
    println!(
        "{:>6} {:>5} {:>10} {:>7} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>8} {:>10}",
        "n", "r", "gap", "metric", "min", "median", "p_hi", "max", "bound", "exceed", "envelope", "max_bwd"
    );
    for g in &report.points {
        let p = &g.point;
        match (&g.summary, &g.failure) {
            (Some(s), _) => {
                for (name, m) in [("ratio1", &s.ratio1), ("ratio2", &s.ratio2), ("norm3", &s.norm3)] {
                    println!(
                        "{:>6} {:>5} {:>10.3e} {:>7} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12} {:>12} {:>8} {:>10.2e}",
                        p.n,
                        p.r,
                        p.gap,
                        name,
                        m.min,
                        m.median,
                        m.p_hi,
                        m.max,
                        fmt_bound(m),
                        format!("{}/{}", m.exceed_count, s.count),
                        g.envelope_violations,
                        s.max_backward_error
                    );
                }
                if s.flagged > 0 {
                    println!("{:>6} {:>5} {:>10.3e} flagged (singular R11): {}", p.n, p.r, p.gap, s.flagged);
                }
                if let Some(e) = g.oracle_errors.iter().map(|e| e.1).reduce(f64::max) {
                    println!("{:>6} {:>5} {:>10.3e} max oracle error: {e:.3e}", p.n, p.r, p.gap);
                }
            }
            (None, Some(f)) => println!("{:>6} {:>5} {:>10.3e} failed: {}", p.n, p.r, p.gap, f.message),
            (None, None) => {}
        }
    }
}

/// Prints the report and writes files; an I/O failure still echoes the summary.
fn finish(report: &ExperimentReport, cfg: &ExperimentConfig) -> Result<i32> {
    print_report(report);
    if let Some(dir) = &cfg.output {
        if let Err(e) = emit_report(report, cfg.format, dir, cfg.plot) {
            if let Ok(json) = summary_json(report) {
                println!("{json}");
            }
            return Err(e);
        }
        println!("wrote reports to {}", dir.display());
    }
    Ok(report.exit_code())
}

fn block_diagnostics(r: &rurv::dense::Matrix, k: usize) -> Result<()> {
    let b = split_r(r, k)?;
    let smin = *jacobi_svd_values(&b.r11)?.last().expect("k >= 1");
    println!("split r = {k}");
    println!("  smin(R11)            {smin:.6e}");
    println!("  smax(R22)            {:.6e}", spectral_norm(&b.r22));
    match solve_upper_triangular(&b.r11, &b.r12) {
        Ok(x) => println!("  |R11^-1 R12|_2       {:.6e}", spectral_norm(&x)),
        Err(e) => println!("  |R11^-1 R12|_2       n/a ({e})"),
    }
    Ok(())
}

fn write_all(dir: &Path, files: &[(&str, &rurv::dense::Matrix)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, m) in files {
        write_matrix(&dir.join(name), m)?;
    }
    println!("wrote factors to {}", dir.display());
    Ok(())
}

fn cmd_factor(a: &FactorArgs) -> Result<i32> {
    let m = read_matrix(&a.input)?;
    let mut rng = SeededRng::new(a.seed, 0);
    println!("n = {}", m.rows());
    if a.ulv {
        let f = rulv(&m, &mut rng)?;
        println!("backward error        {:.3e}", backward_error(&m, &f.u, &f.l, &f.v)?);
        println!("orthogonality U, V    {:.3e} {:.3e}", orthogonality_defect(&f.u), orthogonality_defect(&f.v));
        if let Some(dir) = &a.out {
            write_all(dir, &[("u.txt", &f.u), ("l.txt", &f.l), ("v.txt", &f.v)])?;
        }
        return Ok(0);
    }
    let f = rurv(&m, &mut rng)?;
    println!("backward error        {:.3e}", backward_error(&m, &f.u, &f.r, &f.v)?);
    println!("orthogonality U, V    {:.3e} {:.3e}", orthogonality_defect(&f.u), orthogonality_defect(&f.v));
    if let Some(k) = a.r {
        block_diagnostics(&f.r, k)?;
    }
    if let Some(dir) = &a.out {
        write_all(dir, &[("u.txt", &f.u), ("r.txt", &f.r), ("v.txt", &f.v)])?;
    }
    Ok(0)
}

fn cmd_grurv(a: &GrurvArgs) -> Result<i32> {
    let exps = parse_exponents(&a.exponents)?;
    if exps.len() != a.factors.len() {
        return Err(Error::Config(format!(
            "{} factors but {} exponents",
            a.factors.len(),
            exps.len()
        )));
    }
    let factors = a
        .factors
        .iter()
        .zip(exps)
        .map(|(p, e)| Ok((read_matrix(p)?, e)))
        .collect::<Result<Vec<_>>>()?;
    let chain = FactorChain::new(factors)?;
    let res = grurv(&chain, &mut SeededRng::new(a.seed, 0))?;
    let r = assemble_r(&res)?;
    println!("n = {}, k = {}", chain.dim(), chain.len());
    println!(
        "orthogonality U, V    {:.3e} {:.3e}",
        orthogonality_defect(&res.u_current),
        orthogonality_defect(&res.v)
    );
    if let Some(k) = a.r {
        block_diagnostics(&r, k)?;
    }
    if let Some(dir) = &a.out {
        let names: Vec<String> = (1..=res.r_list.len()).map(|i| format!("r_{i}.txt")).collect();
        let mut files = vec![("u.txt", &res.u_current), ("v.txt", &res.v), ("r.txt", &r)];
        files.extend(names.iter().map(String::as_str).zip(&res.r_list));
        write_all(dir, &files)?;
    }
    Ok(0)
}

fn cmd_mc(a: &McArgs) -> Result<i32> {
    let cfg = McConfig {
        r: a.r,
        n: a.n,
        trials: a.trials,
        deltas: a.delta.clone(),
        seed: a.seed,
        jobs: a.jobs,
        no_bound: a.no_bound,
    };
    let rep = run_mc_svalue(&cfg)?;
    println!("{:>8} {:>12} {:>8} {:>10} {:>10} {:>10}", "delta", "threshold", "hits", "empirical", "bound", "allowed");
    for row in &rep.rows {
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:>8} {:>12.4e} {:>8} {:>10.4} {:>10} {:>10}",
            row.delta,
            row.threshold,
            row.hits,
            row.empirical,
            opt(row.bound),
            opt(row.allowed)
        );
    }
    match (rep.ks, DensityParams::for_corner(a.r, a.n)) {
        (Some(ks), _) => println!("KS distance of s^2 against the density CDF: {ks:.4}"),
        (None, Err(e)) => println!("no density comparison: {e}"),
        (None, Ok(_)) => {}
    }
    if let Some(dir) = &a.out {
        emit_mc_report(&rep, dir)?;
        println!("wrote reports to {}", dir.display());
    }
    Ok(0)
}

fn cmd_bounds(a: &BoundsArgs) -> Result<i32> {
    let spec = SpectrumSpec {
        kind: a.dist,
        n: a.n,
        r: a.r.unwrap_or(a.n / 2),
        gap: a.gap,
        top: a.top,
    };
    print!("{}", print_bounds(&spec, a.delta)?);
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Factor(a) => cmd_factor(&a),
        Command::Grurv(a) => cmd_grurv(&a),
        Command::Experiment(a) => {
            let cfg = a.resolve()?;
            let report = run_experiment(&cfg)?;
            finish(&report, &cfg)
        }
        Command::GrurvExperiment(a) => {
            let cfg = a.common.resolve()?;
            let mut chain = ChainSpec::default();
            if let Some(e) = &a.exponents {
                chain.exponents = parse_exponents(e)?;
            }
            if let Some(c) = a.factor_cond {
                chain.factor_cond = c;
            }
            if let Some(k) = a.oracle_every {
                chain.oracle_every = k;
            }
            let report = run_grurv_experiment(&cfg, &chain)?;
            finish(&report, &cfg)
        }
        Command::McSvalue(a) => cmd_mc(&a),
        Command::Bounds(a) => cmd_bounds(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
