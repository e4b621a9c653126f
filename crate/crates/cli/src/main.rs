//! `tomoforge`: one binary with a subcommand per experiment.

mod commands;
mod io;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CircleArgs, CircleOutput, Context, EntropyArgs, StochasticAction, TomoAction};
use io::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "tomoforge", version, about = "Density-matrix tomography from commuting measurements")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance override (state validation, Birkhoff peeling, ambiguity
    /// convergence).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout if absent. Written atomically.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Export the su(N) generator basis.
    Basis {
        #[arg(long)]
        n: usize,
    },
    /// Simulated measurement and state reconstruction.
    Tomo {
        #[command(subcommand)]
        action: TomoAction,
    },
    /// Diameter of the set of states sharing a diagonal.
    Ambiguity {
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
        /// Objective evaluations.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Doubly stochastic maps of frames.
    Stochastic {
        #[command(subcommand)]
        action: StochasticAction,
    },
    /// Recover a system state from apparatus-side expectations.
    Coupled {
        /// JSON with "configs", "rho_m" and one of "rho_s" / "observations".
        #[arg(long = "in")]
        input: PathBuf,
        /// Report the determined subspace instead of failing when the
        /// design is rank deficient.
        #[arg(long)]
        partial: bool,
    },
    /// Particle on a circle coupled to an oscillator.
    Circle(CircleArgs),
    /// Hausdorff–Young and entropic inequalities.
    Entropy(EntropyArgs),
    /// Run the invariant suite; nonzero exit on any violation.
    Selftest,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("TOMOFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TOMOFORGE_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

/// `Ok(false)` means the run completed but selftest found violations.
fn run(cli: Cli) -> CliResult<bool> {
    configure_threads()?;
    if cli.format == Format::Csv && !matches!(cli.command, Command::Circle(_)) {
        return Err(CliError::Usage("--format csv is only available for `circle`".into()));
    }
    let ctx = Context {
        seed: cli.seed,
        tol: cli.tol,
    };
    if let Some(t) = ctx.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(tomoforge::Error::InvalidInput(format!("--tol {t} must be positive")).into());
        }
    }
    let out = cli.out.as_deref();
    let value = match &cli.command {
        Command::Basis { n } => commands::basis(*n)?,
        Command::Tomo { action } => commands::tomo(action, &ctx)?,
        Command::Ambiguity {
            weights,
            budget,
            restarts,
        } => commands::ambiguity(weights, *budget, *restarts, &ctx)?,
        Command::Stochastic { action } => commands::stochastic(action, &ctx)?,
        Command::Coupled { input, partial } => commands::coupled(input, *partial, &ctx)?,
        Command::Circle(args) => match commands::circle(args, cli.format == Format::Csv)? {
            CircleOutput::Json(v) => v,
            CircleOutput::Csv(text) => {
                io::emit(out, &text)?;
                return Ok(true);
            }
        },
        Command::Entropy(args) => commands::entropy(args, &ctx)?,
        Command::Selftest => {
            let (passed, report) = selftest::run(ctx.seed);
            io::emit(out, &io::to_text(&report))?;
            return Ok(passed);
        }
    };
    io::emit(out, &io::to_text(&value))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { io::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("report serialises"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
