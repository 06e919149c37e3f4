//! `ccsp`: generate, solve, verify, and benchmark chance-constrained
//! programs with finite scenario support.
//!
//! Exit codes: 0 success, 1 parameter error (bad flags or malformed input),
//! 2 solver or runtime failure.

mod bench;
mod methods;
mod verify;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use ccsp::apm::{format_float, write_trace_csv};
use ccsp::bounds::BigMScheme;
use ccsp::instance::{generate_knapsack_instance_with, CcspInstance, VarDomain};
use ccsp::oracle::DEFAULT_ORACLE_CAP;
use ccsp::{CcspError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bench::{run_benchmark, BenchSpec};
use methods::{parse_backend, parse_method, parse_variant, run_method, Method, MethodOpts};
use verify::{print_report, run_verify};

#[derive(Parser)]
#[command(
    name = "ccsp",
    version,
    about = "Adaptive partitioning solver for chance-constrained programs over finite scenario sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded packing-style instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance with an adaptive partitioning variant.
    Solve(SolveArgs),
    /// Compare methods against brute-force enumeration and replay invariants.
    Verify(VerifyArgs),
    /// Run a benchmark grid; write per-run traces and CSV tables.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Continuous,
    Binary,
}

impl From<DomainArg> for VarDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Continuous => VarDomain::Continuous,
            DomainArg::Binary => VarDomain::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BigMArg {
    Box,
    Objcut,
    Partitioned,
}

impl From<BigMArg> for BigMScheme {
    fn from(b: BigMArg) -> Self {
        match b {
            BigMArg::Box => BigMScheme::Box,
            BigMArg::Objcut => BigMScheme::ObjectiveCut,
            BigMArg::Partitioned => BigMScheme::Partitioned,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Constraint rows per scenario.
    #[arg(long, default_value_t = 5)]
    rows: usize,
    /// Number of decision variables.
    #[arg(long, default_value_t = 10)]
    vars: usize,
    /// Number of scenarios.
    #[arg(long, default_value_t = 10)]
    scenarios: usize,
    /// Risk tolerance in [0, 1).
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long, value_enum, default_value_t = DomainArg::Continuous)]
    domain: DomainArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative scenario perturbation magnitude.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Capacity tightness factor.
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    instance: PathBuf,
    /// p_random | p_init | p_infeas | p_final | p_beta.
    #[arg(long, default_value = "p_final")]
    variant: String,
    /// Relative-gap stopping threshold.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Big-M coefficient scheme.
    #[arg(long, value_enum, default_value_t = BigMArg::Objcut)]
    bigm: BigMArg,
    /// 'builtin' or 'external:<command>'.
    #[arg(long, default_value = "builtin")]
    solver: String,
    /// Extra splits for p_beta, in percent.
    #[arg(long)]
    beta: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Directory for cached big-M tables.
    #[arg(long)]
    bigm_cache: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance JSON file.
    instance: PathBuf,
    /// Comma-separated methods (variants and/or baseline[-scheme]).
    #[arg(long, value_delimiter = ',', default_value = "p_final")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long)]
    time_limit: Option<f64>,
    /// Enumeration cap on scenario selections.
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    #[arg(long, value_enum, default_value_t = BigMArg::Objcut)]
    bigm: BigMArg,
    #[arg(long, default_value = "builtin")]
    solver: String,
    #[arg(long)]
    beta: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Objective comparison tolerance against the oracle.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    rows: usize,
    #[arg(long, default_value_t = 10)]
    vars: usize,
    /// Comma-separated scenario counts.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    scenarios: Vec<usize>,
    /// Comma-separated risk tolerances.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    tau: Vec<f64>,
    #[arg(long, value_enum, default_value_t = DomainArg::Continuous)]
    domain: DomainArg,
    /// Perturbed instances per scenario count.
    #[arg(long, default_value_t = 5)]
    replicas: usize,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "p_final")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Per-run wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BigMArg::Objcut)]
    bigm: BigMArg,
    #[arg(long, default_value = "builtin")]
    solver: String,
    #[arg(long)]
    beta: Option<u32>,
    /// Output directory for instances, traces, and tables.
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CcspError::Parameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let instance = generate_knapsack_instance_with(
        args.rows,
        args.vars,
        args.scenarios,
        args.tau,
        args.domain.into(),
        args.seed,
        args.delta,
        args.zeta,
    )?;
    let text = instance.to_json()?;
    match args.out {
        Some(path) => {
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn read_instance(path: &PathBuf) -> Result<CcspInstance> {
    let text = fs::read_to_string(path)
        .map_err(|e| CcspError::Parameter(format!("cannot read {}: {e}", path.display())))?;
    CcspInstance::from_json(&text)
        .map_err(|e| CcspError::Parameter(format!("malformed instance {}: {e}", path.display())))
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let instance = read_instance(&args.instance)?;
    let variant = parse_variant(&args.variant, args.beta)?;
    let opts = MethodOpts {
        epsilon: args.epsilon,
        time_limit_s: args.time_limit,
        seed: args.seed,
        bigm: args.bigm.into(),
        solver: parse_backend(&args.solver)?,
        collect_diagnostics: false,
        bigm_cache_dir: args.bigm_cache,
    };
    let outcome = match run_method(&instance, Method::Apm(variant), &opts) {
        Err(CcspError::Infeasible(msg)) => {
            println!("status: infeasible");
            println!("detail: {msg}");
            return Ok(ExitCode::SUCCESS);
        }
        other => other?,
    };
    println!("status: {}", outcome.status);
    println!("objective: {}", format_float(outcome.objective));
    println!("lower_bound: {}", format_float(outcome.lower_bound));
    println!("upper_bound: {}", format_float(outcome.objective));
    println!("rel_gap: {}", format_float(outcome.gap));
    println!("iterations: {}", outcome.iterations);
    println!("partition_size: {}", outcome.partition_size);
    println!("elapsed_s: {}", format_float(outcome.seconds));
    if let Some(row) = outcome.trace.last() {
        println!("incumbent_source: {}", row.incumbent_source);
    }
    if let Some(path) = &args.trace_out {
        write_trace_csv(path, &outcome.trace)?;
        eprintln!("trace written to {}", path.display());
    }
    if let Some(failure) = &outcome.failure {
        eprintln!("error: {failure}");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let instance = read_instance(&args.instance)?;
    let bigm: BigMScheme = args.bigm.into();
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| parse_method(m, args.beta, bigm))
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(CcspError::Parameter("verify needs at least one method".into()));
    }
    let opts = MethodOpts {
        epsilon: args.epsilon,
        time_limit_s: args.time_limit,
        seed: args.seed,
        bigm,
        solver: parse_backend(&args.solver)?,
        collect_diagnostics: true,
        bigm_cache_dir: None,
    };
    let report = run_verify(&instance, &methods, &opts, args.oracle_cap, args.tol)?;
    let pass = print_report(&report, args.tol);
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let bigm: BigMScheme = args.bigm.into();
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| parse_method(m, args.beta, bigm))
        .collect::<Result<_>>()?;
    let spec = BenchSpec {
        rows: args.rows,
        vars: args.vars,
        scenario_counts: args.scenarios,
        taus: args.tau,
        domain: args.domain.into(),
        replicas: args.replicas,
        methods,
        epsilon: args.epsilon,
        time_limit_s: args.time_limit,
        seed: args.seed,
        bigm,
        solver: parse_backend(&args.solver)?,
        out_dir: args.out_dir,
        jobs: args.jobs,
    };
    let output = run_benchmark(&spec)?;
    let solved = output.rows.iter().filter(|r| r.optimal).count();
    println!("runs: {}", output.rows.len());
    println!("solved: {solved}");
    println!("runs_csv: {}", output.runs_csv.display());
    println!("aggregate_csv: {}", output.aggregate_csv.display());
    Ok(ExitCode::SUCCESS)
}
