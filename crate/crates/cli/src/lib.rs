//! Command-line front end: problem files, `analyze`, `verify`, `generate`
//! and `dist`.
//!
//! Reports are `key=value` lines followed by a whitespace-separated table
//! that starts with a `[table]` line and a header row.

pub mod problem_file;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use facered::harness::{self, Problem, ProbeOptions};
use facered::reduction::{Mode, SearchBudget};
use facered::{AlgebraSpec, BlockKind};
use thiserror::Error;

pub use problem_file::{format_g17, parse_point, ProblemFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

/// Environment variable that overrides the seed stored in a problem file.
pub const SEED_ENV: &str = "FACERED_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] facered::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(facered::Error::BudgetExhausted { .. }) => EXIT_BUDGET,
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "facered", version, about = "Facial reduction and error bounds for symmetric-cone feasibility problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce a problem and print its chain and error-bound certificate.
    Analyze(AnalyzeArgs),
    /// Analyze, then sample ε-feasible points and check the bound.
    Verify(VerifyArgs),
    /// Write a generated problem file.
    Generate(GenerateArgs),
    /// Distances from a point to the cone, the affine set and the feasible set.
    Dist(DistArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Pps,
    Slater,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Pps => Mode::Pps,
            ModeArg::Slater => Mode::Slater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Residual {
    /// Residuals measured by `dist(x, K)`.
    Dist,
    /// Residuals measured by `max(0, −λ_min(x))`.
    Eig,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    pub path: PathBuf,
    /// Matrix rows are in natural coordinates (no √2 scaling).
    #[arg(long)]
    pub raw_matrix: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Pps)]
    pub mode: ModeArg,
    /// Iteration budget of each direction search.
    #[arg(long, default_value_t = 50_000)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = Residual::Dist)]
    pub residual: Residual,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Pps)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 50_000)]
    pub budget: usize,
    /// Comma-separated ε values, at least 4 spanning 3 decades.
    #[arg(long, value_delimiter = ',', default_values_t = harness::DEFAULT_EPS_GRID.to_vec())]
    pub eps_grid: Vec<f64>,
    /// Random probes per ε.
    #[arg(long, default_value_t = 64)]
    pub trials: usize,
    /// Adversarial probes per ε.
    #[arg(long, default_value_t = 8)]
    pub adversarial: usize,
    /// Overrides both the file seed and the environment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(subcommand)]
    pub kind: GenerateKind,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Sturm staircase on `S^n_+`.
    Sturm {
        #[arg(long)]
        n: usize,
    },
    /// Instance with a prescribed reduction depth.
    Designed {
        /// Blocks such as `psd:3 soc:3 orthant:2`.
        #[arg(long, default_value = "psd:3")]
        spec: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sturm staircase over the doubly nonnegative cone, as a product lift.
    Dnn {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Whitespace-separated coordinates of the point.
    pub point: PathBuf,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

pub fn load_problem(args: &ProblemArgs) -> Result<ProblemFile, CliError> {
    ProblemFile::parse(&read(&args.path)?, args.raw_matrix)
}

fn to_problem(file: &ProblemFile) -> Result<Problem, CliError> {
    let mut p = Problem::new(file.name.clone(), file.cone()?, file.affine()?);
    p.seed = file.seed;
    Ok(p)
}

/// `--seed`, else `FACERED_SEED`, else the file.
pub fn effective_seed(flag: Option<u64>, file_seed: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(file_seed),
    }
}

/// At least 4 positive values spanning at least 3 decades.
pub fn check_eps_grid(grid: &[f64]) -> Result<Vec<f64>, CliError> {
    if grid.len() < 4 {
        return Err(CliError::Usage(format!(
            "--eps-grid needs at least 4 values, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(CliError::Usage("--eps-grid values must lie in (0, 1]".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    if (g[0] / g[g.len() - 1]).log10() < 3.0 - 1e-9 {
        return Err(CliError::Usage("--eps-grid must span at least 3 decades".into()));
    }
    Ok(g)
}

fn kv(out: &mut dyn Write, key: &str, value: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{key}={value}").map_err(io)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Verify(v) => cmd_verify(&v, out),
        Command::Generate(g) => cmd_generate(&g, out),
        Command::Dist(d) => cmd_dist(&d, out),
    }
}

fn write_problem_header(file: &ProblemFile, out: &mut dyn Write) -> Result<(), CliError> {
    kv(out, "problem.name", &file.name)?;
    kv(out, "problem.cone", join(&file.blocks))?;
    kv(out, "problem.dim", file.dim())?;
    kv(out, "problem.rows", file.a.len())
}

fn write_analysis(
    analysis: &harness::Analysis,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let chain = &analysis.chain;
    let x_star = analysis.oracle.feasible_point();
    kv(out, "feasibility", "feasible")?;
    kv(out, "feasible_point.norm", format_g17(x_star.norm()))?;
    kv(out, "feasible_point.dist_affine", format_g17(analysis.oracle.dist_affine(&x_star)))?;
    kv(out, "chain.mode", chain.mode)?;
    kv(out, "chain.steps", chain.steps())?;
    kv(out, "chain.termination", chain.termination)?;
    kv(out, "chain.face_ranks", join(&chain.face_ranks()))?;
    kv(out, "cap.dim_w", chain.dim_w)?;
    kv(out, "cap.rank", chain.rank_cap)?;
    kv(out, "cap.steps", chain.cap)?;
    Ok(())
}

fn write_chain_table(analysis: &harness::Analysis, out: &mut dyn Write) -> Result<(), CliError> {
    let chain = &analysis.chain;
    writeln!(out, "[table]").map_err(io)?;
    writeln!(out, "step rank block_ranks search_iterations search_gap").map_err(io)?;
    for (i, face) in chain.faces.iter().enumerate() {
        let (iters, gap) = chain
            .reports
            .get(i)
            .map(|r| (r.iterations.to_string(), format!("{:.3e}", r.gap)))
            .unwrap_or(("-".into(), "-".into()));
        writeln!(out, "{i} {} {} {iters} {gap}", face.rank(), join(&face.ranks()).replace(' ', ","))
            .map_err(io)?;
    }
    Ok(())
}

/// Fit `c` in `dist(x, K) ≤ c · max(0, −λ_min(x))` on ε-feasible samples.
fn fit_eig_constant(analysis: &harness::Analysis, seed: u64) -> Result<f64, CliError> {
    let opts = ProbeOptions {
        random_trials: 16,
        adversarial_trials: 0,
        seed,
        ..ProbeOptions::default()
    };
    let samples = harness::make_probe_samples(&analysis.oracle, &opts)?;
    let cone = analysis.oracle.cone();
    let mut c: f64 = 0.0;
    for s in samples {
        let viol = (-cone.lambda_min(&s.x)?).max(0.0);
        if viol > 1e-14 {
            c = c.max(s.dist_k / viol);
        }
    }
    Ok(c)
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = load_problem(&args.problem)?;
    let problem = to_problem(&file)?;
    let budget = SearchBudget::with_max_iter(args.budget);
    let analysis = harness::analyze(&problem, args.mode.into(), &budget)?;
    write_problem_header(&file, out)?;
    write_analysis(&analysis, out)?;
    let cert = analysis
        .certificate
        .as_ref()
        .ok_or(facered::Error::CertificateUnavailable)?;
    out.write_all(cert.to_record().as_bytes()).map_err(io)?;
    match args.residual {
        Residual::Dist => kv(out, "residual", "dist")?,
        Residual::Eig => {
            kv(out, "residual", "eig")?;
            kv(
                out,
                "residual.note",
                "the bound also holds with dist(x,K) replaced by max(0,-lambda_min(x)) times the constant below",
            )?;
            let rank = problem.spec().rank();
            kv(out, "residual.eig_constant_bound", format_g17((rank as f64).sqrt()))?;
            let fitted = fit_eig_constant(&analysis, file.seed)?;
            kv(out, "residual.eig_constant_fitted", format_g17(fitted))?;
        }
    }
    write_chain_table(&analysis, out)?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let grid = check_eps_grid(&args.eps_grid)?;
    let file = load_problem(&args.problem)?;
    let seed = effective_seed(args.seed, file.seed)?;
    let problem = to_problem(&file)?;
    let budget = SearchBudget::with_max_iter(args.budget);
    let analysis = harness::analyze(&problem, args.mode.into(), &budget)?;
    let opts = ProbeOptions {
        eps_grid: grid,
        random_trials: args.trials,
        adversarial_trials: args.adversarial,
        seed,
        ..ProbeOptions::default()
    };
    let report = harness::verify(&analysis, &opts)?;
    write_problem_header(&file, out)?;
    write_analysis(&analysis, out)?;
    out.write_all(report.certificate.to_record().as_bytes())
        .map_err(io)?;
    kv(out, "verify.seed", seed)?;
    kv(out, "verify.rho", format_g17(report.rho))?;
    kv(out, "verify.samples", report.samples.len())?;
    kv(out, "fit.slope", format_g17(report.fit_all.slope))?;
    kv(out, "fit.intercept", format_g17(report.fit_all.intercept))?;
    kv(out, "fit.residual", format_g17(report.fit_all.residual))?;
    kv(out, "fit.count", report.fit_all.count)?;
    kv(out, "fit.exact", report.fit_all.exact)?;
    if let Some(f) = &report.fit_adversarial {
        kv(out, "fit.adversarial.slope", format_g17(f.slope))?;
        kv(out, "fit.adversarial.exact", f.exact)?;
    }
    let b = &report.bound;
    kv(out, "kappa_star", format_g17(b.kappa_star))?;
    kv(out, "kappa_coarse", format_g17(b.kappa_coarse))?;
    kv(out, "kappa_stable", b.stable)?;
    kv(out, "calibration", b.calibration)?;
    kv(out, "held_out", b.held_out)?;
    kv(out, "violations", b.violations)?;
    writeln!(out, "[table]").map_err(io)?;
    writeln!(out, "eps stream count max_dist mean_dist bound margin").map_err(io)?;
    for r in &b.rows {
        writeln!(
            out,
            "{:.1e} {} {} {:.6e} {:.6e} {:.6e} {:.6e}",
            r.eps, r.stream, r.count, r.max_dist, r.mean_dist, r.bound, r.margin
        )
        .map_err(io)?;
    }
    Ok(if b.violations > 0 { EXIT_VIOLATIONS } else { EXIT_OK })
}

pub fn generate(kind: &GenerateKind) -> Result<ProblemFile, CliError> {
    let p = match kind {
        GenerateKind::Sturm { n } => harness::sturm_family(*n)?,
        GenerateKind::Designed { spec, depth, seed } => {
            let blocks = spec
                .split_whitespace()
                .map(|t| t.parse::<BlockKind>())
                .collect::<Result<Vec<_>, _>>()?;
            harness::designed_singularity(&AlgebraSpec::new(blocks)?, *depth, *seed)?
        }
        GenerateKind::Dnn { n } => harness::dnn_sturm(*n)?,
    };
    Ok(ProblemFile::from_parts(&p.name, p.seed, &p.cone, &p.affine))
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = generate(&args.kind)?.to_text();
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => out.write_all(text.as_bytes()).map_err(io)?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_dist(args: &DistArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = load_problem(&args.problem)?;
    let x = parse_point(&read(&args.point)?, &file.blocks, args.problem.raw_matrix)?;
    let problem = to_problem(&file)?;
    let analysis = harness::analyze(&problem, Mode::Slater, &SearchBudget::default())?;
    let proj = analysis.oracle.project(&x);
    kv(out, "dist_k", format_g17(analysis.oracle.dist_cone(&x)))?;
    kv(out, "dist_affine", format_g17(analysis.oracle.dist_affine(&x)))?;
    kv(out, "dist_feasible", format_g17(proj.dist))?;
    kv(out, "dist_feasible.converged", proj.converged)?;
    kv(out, "dist_feasible.iterations", proj.iterations)?;
    Ok(EXIT_OK)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
