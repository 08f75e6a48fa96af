//! iclab: reproducible experiments over the information-complexity core.
//!
//! Every run is a pure function of (config, seed, library version): output
//! files are byte-identical across reruns. Wall time is reported on stderr
//! so it never touches the artifacts.

mod config;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use iclab_core::{Error, Result};

use config::{parse_u32_list, ExperimentConfig, Overrides};
use runs::Outcome;

const EXIT_HELP: &str = "Exit codes:
  0  success
  2  validation error (bad flags, config, or input files)
  3  resource cap exceeded
  4  a checked mathematical guarantee was falsified
  5  the solver did not converge within the iteration cap (outputs are still written)

The environment variable ICLAB_THREADS caps worker threads.";

#[derive(Parser)]
#[command(name = "iclab", version = iclab_core::VERSION, after_help = EXIT_HELP)]
#[command(about = "Compute, certify, and lower-bound the information complexity of finite hypothesis classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the adversarial lower bound over threshold classes.
    ///
    /// CSV schema: n,mi,conditional_mi,event_probability (rows sorted by n).
    #[command(name = "thresholds-lb")]
    ThresholdsLb(ThresholdsArgs),

    /// Solve the min-max information game to a certified interval.
    ///
    /// CSV schema: n,m,grid,pool_size,lower,upper,gap,iterations,converged,oracle.
    #[command(name = "ic-solve")]
    IcSolve(IcSolveArgs),

    /// Certify the product-class lower bound from per-factor games.
    ///
    /// CSV schema: factor,n,lower,gap,converged,alpha,window_probability,
    /// expected_cost,headline_bound (rows sorted by factor).
    #[command(name = "direct-sum")]
    DirectSum(DirectSumArgs),

    /// Run the randomized invariant suites over the kernels.
    ///
    /// CSV schema: suite,trials,checks,worst_slack,worst_check (rows sorted
    /// by suite).
    Invariants(InvariantsArgs),
}

#[derive(Args)]
struct Shared {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// RNG seed; mandatory, here or in the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Output stem; the run writes <out>.csv and <out>.json.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Convergence tolerance in bits.
    #[arg(long)]
    tol: Option<f64>,

    /// Iteration cap for the solvers.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct ThresholdsArgs {
    #[command(flatten)]
    shared: Shared,

    /// Comma-separated threshold sizes to sweep, e.g. 2,3,4.
    #[arg(long)]
    n: Option<String>,

    /// Sample size (at least 2).
    #[arg(long)]
    m: Option<usize>,

    /// leftmost | rightmost | uniform-consistent | path to a channel file.
    #[arg(long)]
    learner: Option<String>,
}

#[derive(Args)]
struct IcSolveArgs {
    #[command(flatten)]
    shared: Shared,

    /// Threshold size of the class.
    #[arg(long)]
    n: Option<String>,

    /// Sample size.
    #[arg(long)]
    m: Option<usize>,

    /// Pool file (JSON array of labeled distributions); the default pool is
    /// the realizable grid net at the configured resolution.
    #[arg(long)]
    pool: Option<PathBuf>,

    /// Grid resolution for the default pool, rounding, and the oracle.
    #[arg(long)]
    grid: Option<usize>,

    /// External oracle store to compare against (and write when pinning).
    #[arg(long)]
    oracle: Option<PathBuf>,

    /// Compute the brute-force value and store it if the key is missing.
    #[arg(long)]
    pin_oracle: bool,
}

#[derive(Args)]
struct DirectSumArgs {
    #[command(flatten)]
    shared: Shared,

    /// Number of factors; pads the factor list with threshold size 1.
    #[arg(long)]
    d: Option<usize>,

    /// Comma-separated threshold sizes of the factors, e.g. 1,2.
    #[arg(long)]
    factors: Option<String>,

    /// Per-factor sample budget (at least 2).
    #[arg(long)]
    m: Option<usize>,

    /// leftmost | rightmost | uniform-consistent | path to a channel file.
    #[arg(long)]
    learner: Option<String>,
}

#[derive(Args)]
struct InvariantsArgs {
    #[command(flatten)]
    shared: Shared,

    /// Trials per suite.
    #[arg(long)]
    trials: Option<u64>,

    /// Comma-separated suite names, or "all".
    #[arg(long)]
    suites: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match dispatch(cli) {
        Ok(Outcome { converged: true }) => 0,
        Ok(Outcome { converged: false }) => {
            eprintln!("not converged within the iteration cap");
            5
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::from(code)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Contract(_) | Error::Parse(_) => 2,
        Error::Resource(_) => 3,
        Error::PropertyFalsified(_) => 4,
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    init_threads()?;
    let cfg = match cli.command {
        Command::ThresholdsLb(a) => {
            let mut flags = shared_overrides(&a.shared)?;
            flags.n = a.n.as_deref().map(parse_u32_list).transpose()?;
            flags.m = a.m;
            flags.learner = a.learner;
            ExperimentConfig::resolve("thresholds-lb", a.shared.config.as_deref(), flags)?
        }
        Command::IcSolve(a) => {
            let mut flags = shared_overrides(&a.shared)?;
            flags.n = a.n.as_deref().map(parse_u32_list).transpose()?;
            flags.m = a.m;
            flags.pool = a.pool;
            flags.grid = a.grid;
            flags.oracle = a.oracle;
            flags.pin_oracle = a.pin_oracle;
            ExperimentConfig::resolve("ic-solve", a.shared.config.as_deref(), flags)?
        }
        Command::DirectSum(a) => {
            let mut flags = shared_overrides(&a.shared)?;
            flags.d = a.d;
            flags.factors = a.factors.as_deref().map(parse_u32_list).transpose()?;
            flags.m = a.m;
            flags.learner = a.learner;
            ExperimentConfig::resolve("direct-sum", a.shared.config.as_deref(), flags)?
        }
        Command::Invariants(a) => {
            let mut flags = shared_overrides(&a.shared)?;
            flags.trials = a.trials;
            flags.suites = a
                .suites
                .map(|raw| raw.split(',').map(|s| s.trim().to_string()).collect());
            ExperimentConfig::resolve("invariants", a.shared.config.as_deref(), flags)?
        }
    };
    runs::run(&cfg)
}

fn shared_overrides(shared: &Shared) -> Result<Overrides> {
    Ok(Overrides {
        seed: shared.seed,
        out: shared.out.clone(),
        tol: shared.tol,
        iters: shared.iters,
        ..Overrides::default()
    })
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("ICLAB_THREADS") {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| {
                Error::Contract(format!("ICLAB_THREADS must be a positive integer, got `{raw}`"))
            })?;
        // A second initialization (e.g. in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}
