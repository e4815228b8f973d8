mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nonlocal", version, about = "Nonlocal vector operators: symbols, solvers and checks")]
struct Cli {
    /// Worker threads; NONLOCAL_THREADS overrides this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the matrix symbol on the grid frequencies as CSV.
    Symbol {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve (L + lambda) u = f.
    SolveElliptic {
        config: PathBuf,
        /// Right-hand side (NLSF); synthesized from the config seed when omitted.
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Manifest path; defaults to `<output>.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Leave wall-clock timings out of the manifest.
        #[arg(long)]
        omit_timings: bool,
    },
    /// Solve u' + (L + lambda) u = g, u(0) = 0, up to the horizon.
    SolveParabolic {
        config: PathBuf,
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Final state u(T) (NLSF).
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Per-node L2 norms of the trajectory as CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        omit_timings: bool,
    },
    /// Run named check suites and emit a JSON report.
    Verify {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time symbol tabulation and solves at several grid sizes.
    Bench {
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum Failure {
    /// Some verify check did not pass; the report was written.
    Check,
    Config(anyhow::Error),
    Io(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure::Config(e.into())
    }

    pub fn io(e: impl Into<anyhow::Error>) -> Self {
        Failure::Io(e.into())
    }

    pub fn solver(e: impl Into<anyhow::Error>) -> Self {
        Failure::Solver(e.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Solver(_) => 4,
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<(), Failure> {
    let threads = match std::env::var("NONLOCAL_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| Failure::config(anyhow::anyhow!("NONLOCAL_THREADS={v:?}: {e}")))?,
        ),
        Err(_) => flag,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::config)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Symbol { config, output } => commands::symbol(&config, output.as_deref()),
        Command::SolveElliptic {
            config,
            input,
            output,
            manifest,
            omit_timings,
        } => commands::solve_elliptic(&config, input.as_deref(), &output, manifest.as_deref(), !omit_timings),
        Command::SolveParabolic {
            config,
            input,
            output,
            manifest,
            trajectory,
            omit_timings,
        } => commands::solve_parabolic(
            &config,
            input.as_deref(),
            &output,
            manifest.as_deref(),
            trajectory.as_deref(),
            !omit_timings,
        ),
        Command::Verify { config, output } => commands::verify(&config, output.as_deref()),
        Command::Bench { config, output } => commands::bench(config.as_deref(), output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(f) => {
            let (kind, err) = match &f {
                Failure::Config(e) => ("config", e),
                Failure::Io(e) => ("io", e),
                Failure::Solver(e) => ("solver", e),
                Failure::Check => unreachable!(),
            };
            let obj = json!({
                "error": {
                    "kind": kind,
                    "code": f.code(),
                    "message": format!("{err:#}"),
                }
            });
            eprintln!("{obj}");
            ExitCode::from(f.code())
        }
    }
}
