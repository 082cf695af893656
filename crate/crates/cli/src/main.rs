//! `pgap`: command-line front end of the pgap laboratory.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "pgap", version, about = "Gap constants, absolute gradients and fixed points of l^p regular representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (default `pgap-out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    radius: Option<usize>,

    #[arg(long, global = true, value_name = "X")]
    p: Option<f64>,

    /// Mean exponent of the energy; accepts `inf`.
    #[arg(long, global = true, value_name = "X|inf", value_parser = parse_r)]
    r: Option<f64>,

    /// Multi-start count of the gap and moduli optimizers.
    #[arg(long, global = true, value_name = "N")]
    starts: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build a word-metric ball and summarize it.
    Ball,
    /// Estimate gap constants and check the chain of inequalities.
    Gap,
    /// Descend the displacement energy of an affine action to a fixed point.
    Descend,
    /// Run the invariant suites on the configured instance.
    Verify,
    /// Estimate moduli of convexity and smoothness and check duality-map continuity.
    Moduli,
}

fn parse_r(s: &str) -> Result<f64, String> {
    pgap_core::io::parse_exponent(s).map_err(|e| e.to_string())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(text) = std::env::var("PGAP_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| Failure::validation(format!("PGAP_THREADS = {text:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::validation(e.to_string()))
}

fn run(cli: Cli) -> Result<commands::Outcome, Failure> {
    configure_threads()?;
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        radius: cli.radius,
        p: cli.p,
        r: cli.r,
        starts: cli.starts,
    };
    let config = config::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Ball => commands::ball(config),
        Command::Gap => commands::gap(config),
        Command::Descend => commands::descend(config),
        Command::Verify => commands::verify(config),
        Command::Moduli => commands::moduli(config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            match outcome.failure {
                Some(f) => {
                    eprintln!("error: {f}");
                    f.exit_code()
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
