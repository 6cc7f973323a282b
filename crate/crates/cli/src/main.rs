mod commands;
mod config;
mod output;

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use congruence_lab::Execution;

use crate::output::{Format, Sink};

/// Exact counts, Gauss sums and sieve data for inhomogeneous quadratic congruences.
#[derive(Debug, Parser)]
#[command(name = "congruence-lab", version)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, global = true, env = "CONGRUENCE_LAB_THREADS")]
    threads: Option<NonZeroUsize>,
    /// Output file; CSV output also gets a .json mirror.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t)]
    format: Format,
    /// Flat key=value file; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fill in wall-clock seconds (otherwise 0, keeping output reproducible).
    #[arg(long, global = true)]
    timing: bool,
    /// Run every sweep on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed form of G(s, t; u) next to the direct sum.
    Gauss(commands::GaussArgs),
    /// Exact count of a x^e + b y^f = 0 mod q in a box.
    Count(commands::CountArgs),
    /// Count, main term and envelope over a list of moduli.
    Thm1Scan(commands::Thm1ScanArgs),
    /// Checks the saw-tooth approximation at seeded points.
    Vaaler(commands::VaalerArgs),
    /// Weighted sums over a family of coefficients and moduli.
    AvgScan(commands::AvgScanArgs),
    /// Lists almost-prime points on the torsor slice for a budget B.
    Dp6Enumerate(commands::Dp6EnumerateArgs),
    /// Sieve input conditions for one prime q (JSON).
    Dp6Sieve(commands::Dp6SieveArgs),
    /// Almost-prime point counts for a list of budgets.
    Dp6Growth(commands::Dp6GrowthArgs),
    /// Bilinear Jacobi-symbol sums with seeded signs.
    Bilinear(commands::BilinearArgs),
}

pub struct Context {
    pub seed: u64,
    pub mode: Execution,
    pub timing: bool,
    pub sink: Sink,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        congruence_lab::exec::init_threads(n.get());
    }
    let ctx = Context {
        seed: cli.seed,
        mode: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        timing: cli.timing,
        sink: Sink {
            format: cli.format,
            out: cli.out,
        },
    };
    commands::dispatch(&cli.command, &ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::merge_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<congruence_lab::Error>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
