//! `sddm`: generate SDDM instances, build covers, solve entrywise, verify
//! against the exact oracle, and benchmark.
//!
//! Exit codes: 0 success, 1 verification failed, 2 unreadable or malformed
//! input, 3 invalid matrix or right-hand side, 4 solver failure, 5 instance
//! beyond the oracle cap.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sddm_entrywise::cover::{build_cover, Cover, CoverError, CoverMode};
use sddm_entrywise::generate::{generate, random_rhs, Family, InstanceSpec, Surplus};
use sddm_entrywise::io::{read_matrix_market, read_vector, write_matrix_market, write_vector, IoError};
use sddm_entrywise::matrix::{SddmMatrix, ValidationError};
use sddm_entrywise::oracle::{
    entrywise_check, exact_solve_f64, verify_cover, InvariantChecker, OracleConfig, OracleError,
};
use sddm_entrywise::solve::{
    sddm_solve, sddm_solve_observed, solve_params, solve_with_cover, SolveError, SolveOptions, SolveReport,
};
use sddm_entrywise::{Execution, Scale};

/// Verification ran and found a violation.
#[derive(Debug)]
struct VerifyFailed;

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("verification failed")
    }
}

impl std::error::Error for VerifyFailed {}

/// Input files that do not parse at all.
#[derive(Debug)]
struct BadInput(String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

#[derive(Parser)]
#[command(name = "sddm", version, about = "Entrywise-accurate SDDM solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve L x = b to entrywise accuracy e^{±eps}.
    Solve(SolveArgs),
    /// Build a low-diameter cover and write it as JSON.
    Cover(CoverArgs),
    /// Check a cover, a solution, or the decay invariants against the exact oracle.
    Verify(VerifyArgs),
    /// Write a random SDDM instance (and optionally a right-hand side).
    Generate(GenerateArgs),
    /// Solve a grid of generated instances and emit per-run counters as CSV.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Desk)]
    mode: Mode,
    /// Run without data parallelism.
    #[arg(long)]
    sequential: bool,
}

impl SolverFlags {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            mode: self.mode.into(),
            seed: self.seed,
            execution: if self.sequential { Execution::Sequential } else { Execution::Parallel },
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Paper,
    Desk,
}

impl From<Mode> for CoverMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => CoverMode::Paper,
            Mode::Desk => CoverMode::Desk,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    matrix: PathBuf,
    rhs: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Reuse a cover written by `sddm cover`.
    #[arg(long)]
    cover: Option<PathBuf>,
    /// Per-iteration records, one JSON object per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write x̃; standard output by default.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CoverArgs {
    matrix: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Level count override.
    #[arg(long)]
    ell: Option<usize>,
    /// Repetitions per (level, rate) cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Skip levels whose certified separation is below this; defaults to
    /// what a solve at `--eps` needs.
    #[arg(long)]
    min_r_out: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum What {
    Cover,
    Solution,
    DecayInvariants,
}

#[derive(Args)]
struct VerifyArgs {
    matrix: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    /// Cover JSON (`--what cover`).
    #[arg(long)]
    cover: Option<PathBuf>,
    /// Right-hand side (`--what solution|decay-invariants`).
    #[arg(long)]
    rhs: Option<PathBuf>,
    /// Candidate solution (`--what solution`).
    #[arg(long)]
    solution: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Largest dimension the oracle accepts.
    #[arg(long, default_value_t = OracleConfig::default().max_n)]
    max_n: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(short, long)]
    n: usize,
    #[arg(short, long, default_value_t = 10)]
    u: i64,
    /// Extra edges per vertex (random families).
    #[arg(long, default_value_t = 2.0)]
    density: f64,
    /// `endpoint`, `all`, or `random:<p>`.
    #[arg(long, default_value = "endpoint", value_parser = parse_surplus)]
    surplus: Surplus,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write a random integer right-hand side in [0, U].
    #[arg(short, long)]
    rhs: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = parse_family, value_delimiter = ',', num_args = 0.., default_value = "random-graph")]
    family: Vec<Family>,
    #[arg(short, long, value_delimiter = ',', num_args = 0.., default_value = "50,100,200")]
    n: Vec<usize>,
    #[arg(short, long, value_delimiter = ',', num_args = 0.., default_value = "10")]
    u: Vec<i64>,
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "0.1")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long)]
    sequential: bool,
    /// CSV destination; standard output by default.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

fn parse_surplus(s: &str) -> Result<Surplus, String> {
    match s {
        "endpoint" => Ok(Surplus::Endpoint),
        "all" => Ok(Surplus::All),
        _ => match s.strip_prefix("random:").map(str::parse::<f64>) {
            Some(Ok(p)) if (0.0..=1.0).contains(&p) => Ok(Surplus::Random(p)),
            _ => Err(format!("expected endpoint, all or random:<p in [0,1]>, got '{s}'")),
        },
    }
}

fn read_matrix(path: &Path) -> Result<SddmMatrix> {
    read_matrix_market(path).with_context(|| format!("reading matrix {}", path.display()))
}

fn read_rhs(path: &Path) -> Result<Vec<f64>> {
    read_vector(path).with_context(|| format!("reading vector {}", path.display()))
}

fn read_cover(path: &Path) -> Result<Cover> {
    let text = fs::read_to_string(path).with_context(|| format!("reading cover {}", path.display()))?;
    Cover::from_json(&text).with_context(|| format!("parsing cover {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialise"));
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let l = read_matrix(&a.matrix)?;
    let b = read_rhs(&a.rhs)?;
    let s = &a.solver;
    let opts = s.options();
    let report = match &a.cover {
        Some(path) => {
            let cover = read_cover(path)?;
            solve_with_cover(&l, &b, s.eps, s.delta, &cover, &opts)?
        }
        None => sddm_solve(&l, &b, s.eps, s.delta, &opts)?,
    };
    match &a.output {
        Some(p) => write_vector(p, report.x.values()).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", sddm_entrywise::io::format_vector(report.x.values())),
    }
    if let Some(p) = &a.report {
        write_text(p, &report.to_json())?;
    }
    if let Some(p) = &a.trace {
        write_text(p, &report.trace_jsonl())?;
    }
    eprintln!(
        "solved {}/{} entries in {} iterations over {} component(s), {:.1} ms",
        report.solved().len(),
        report.n,
        report.totals.iterations,
        report.components,
        report.wall_clock_ms
    );
    Ok(())
}

fn cmd_cover(a: &CoverArgs) -> Result<()> {
    let l = read_matrix(&a.matrix)?;
    let s = &a.solver;
    let mut opts = s.options();
    opts.ell = a.ell;
    opts.reps = a.reps;
    let mut params = solve_params(&l, s.eps, s.delta, &opts);
    if a.min_r_out.is_some() {
        params.min_r_out = a.min_r_out;
    }
    let start = Instant::now();
    let cover = build_cover(&l, &params, s.seed, opts.execution)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    write_text(&a.output, &cover.to_json())?;
    for w in &cover.stats.warnings {
        eprintln!("warning: {w}");
    }
    let hist: Vec<_> = cover.size_histogram().into_iter().map(|(size, count)| json!({"size": size, "count": count})).collect();
    print_json(&json!({
        "pairs": cover.len(),
        "max_multiplicity": cover.max_multiplicity(),
        "size_histogram": hist,
        "r_in": cover.bounds.r_in,
        "r_out": cover.bounds.r_out.is_finite().then_some(cover.bounds.r_out),
        "alpha": cover.bounds.alpha,
        "patches": cover.stats.patches,
        "levels_used": cover.stats.levels_used,
        "iterations": cover.stats.iterations,
        "wall_clock_ms": ms,
    }));
    Ok(())
}

fn need<'p>(p: &'p Option<PathBuf>, flag: &str, what: &str) -> Result<&'p Path> {
    match p {
        Some(p) => Ok(p),
        None => Err(BadInput(format!("--what {what} requires --{flag}")).into()),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let l = read_matrix(&a.matrix)?;
    let cfg = OracleConfig { max_n: a.max_n, ..OracleConfig::default() };
    cfg.check(&l)?;
    let s = &a.solver;
    match a.what {
        What::Cover => {
            let cover = read_cover(need(&a.cover, "cover", "cover")?)?;
            if cover.matrix_hash != l.content_hash() {
                eprintln!("warning: cover was built for a different matrix ({})", cover.matrix_hash);
            }
            let bd = cover.bounds;
            let rep = verify_cover(&l, &cover, bd.r_in, bd.r_out, bd.alpha, &cfg)?;
            print_json(&serde_json::to_value(&rep).expect("report serialises"));
            for (name, c) in rep.checks() {
                if !c.pass {
                    eprintln!("FAIL {name}: witness {:?}", c.witness);
                }
            }
            Ok(rep.all_pass())
        }
        What::Solution => {
            let b = read_rhs(need(&a.rhs, "rhs", "solution")?)?;
            let x = read_rhs(need(&a.solution, "solution", "solution")?)?;
            let exact = exact_solve_f64(&l, &b, &cfg)?;
            let rep = entrywise_check(&x, &exact, s.eps)?;
            print_json(&json!({
                "pass": rep.pass,
                "eps": s.eps,
                "worst_log_ratio": rep.worst_log_ratio,
                "witness": rep.witness.map(|i| i + 1),
                "zero_mismatch": rep.zero_mismatch,
            }));
            Ok(rep.pass)
        }
        What::DecayInvariants => {
            let b = read_rhs(need(&a.rhs, "rhs", "decay-invariants")?)?;
            let exact = exact_solve_f64(&l, &b, &cfg)?;
            let mut chk = InvariantChecker::new(&exact, Scale::of(&l), s.eps, None);
            let report = sddm_solve_observed(&l, &b, s.eps, s.delta, &s.options(), Some(&mut chk))?;
            let final_check = entrywise_check(report.x.values(), &exact, s.eps)?;
            let pass = chk.report.all_pass() && final_check.pass;
            print_json(&json!({
                "pass": pass,
                "invariants": serde_json::to_value(&chk.report).expect("report serialises"),
                "entrywise": serde_json::to_value(&final_check).expect("report serialises"),
            }));
            Ok(pass)
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let spec = InstanceSpec { family: a.family, n: a.n, u: a.u, density: a.density, surplus: a.surplus, seed: a.seed };
    let l = generate(&spec)?;
    write_matrix_market(&a.output, &l).with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(p) = &a.rhs {
        write_vector(p, &random_rhs(a.n, a.u, a.seed)).with_context(|| format!("writing {}", p.display()))?;
    }
    eprintln!("wrote n = {}, nnz = {}, U = {}", l.n(), l.nnz(), l.bound());
    Ok(())
}

const BENCH_HEADER: [&str; 16] = [
    "family",
    "n",
    "m",
    "U",
    "eps",
    "seed",
    "rep",
    "wall_clock_ms",
    "sum_h",
    "sum_h_nnz",
    "rhs_updates",
    "solver_iterations",
    "decay_iterations",
    "r_in",
    "max_dwell",
    "h_bound_ok",
];

fn bench_row(family: &str, l: &SddmMatrix, eps: f64, seed: u64, rep: usize, r: &SolveReport) -> (Vec<String>, bool) {
    let n = l.n();
    let ok = r.totals.sum_h as f64 <= n as f64 * r.cover.r_in;
    let row = vec![
        family.to_string(),
        n.to_string(),
        l.nnz().to_string(),
        l.bound().to_string(),
        eps.to_string(),
        seed.to_string(),
        rep.to_string(),
        format!("{:.3}", r.wall_clock_ms),
        r.totals.sum_h.to_string(),
        r.totals.sum_h_nnz.to_string(),
        r.totals.rhs_updates.to_string(),
        r.totals.cg_iterations.to_string(),
        r.totals.iterations.to_string(),
        format!("{}", r.cover.r_in),
        r.dwell.iter().max().copied().unwrap_or(0).to_string(),
        ok.to_string(),
    ];
    (row, ok)
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Path => "path",
        Family::Grid => "grid",
        Family::RandomGraph => "random-graph",
        Family::Dumbbell => "dumbbell",
        Family::Expander => "expander",
        Family::DecayingPath => "decaying-path",
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<bool> {
    let sink: Box<dyn std::io::Write> = match &a.output {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(BENCH_HEADER)?;
    let mut all_ok = true;
    for &family in &a.family {
        for &n in &a.n {
            for &u in &a.u {
                let spec = InstanceSpec { family, n, u, density: a.density, surplus: Surplus::Endpoint, seed: a.seed };
                let l = generate(&spec)?;
                let b = random_rhs(n, u, a.seed);
                for &eps in &a.eps {
                    for rep in 0..a.repeat {
                        let opts = SolveOptions {
                            seed: a.seed,
                            execution: if a.sequential { Execution::Sequential } else { Execution::Parallel },
                            ..SolveOptions::default()
                        };
                        let r = sddm_solve(&l, &b, eps, a.delta, &opts)?;
                        let (row, ok) = bench_row(family_name(family), &l, eps, a.seed, rep, &r);
                        if !ok {
                            eprintln!("warning: sum|H| = {} exceeds n r_in for n = {n}, U = {u}", r.totals.sum_h);
                        }
                        all_ok &= ok;
                        out.write_record(&row)?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(all_ok)
}

/// Maps an error to its documented exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<VerifyFailed>() {
            return 1;
        }
        if cause.is::<BadInput>() || cause.is::<csv::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<IoError>() {
            return match e {
                IoError::Invalid(_) => 3,
                IoError::Parse { .. } | IoError::Io(_) => 2,
            };
        }
        if cause.is::<ValidationError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<CoverError>() {
            return if matches!(e, CoverError::Format(_)) { 2 } else { 4 };
        }
        if let Some(e) = cause.downcast_ref::<SolveError>() {
            return match e {
                SolveError::NegativeRhs { .. } | SolveError::DimensionMismatch { .. } => 3,
                _ => 4,
            };
        }
        if let Some(e) = cause.downcast_ref::<OracleError>() {
            return match e {
                OracleError::CapExceeded { .. } => 5,
                OracleError::DimensionMismatch { .. } | OracleError::NonFinite(_) => 3,
                _ => 4,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    4
}

fn run(cli: Cli) -> Result<()> {
    let pass = match &cli.command {
        Command::Solve(a) => cmd_solve(a).map(|()| true),
        Command::Cover(a) => cmd_cover(a).map(|()| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Generate(a) => cmd_generate(a).map(|()| true),
        Command::Bench(a) => cmd_bench(a),
    }?;
    if !pass {
        return Err(VerifyFailed.into());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
