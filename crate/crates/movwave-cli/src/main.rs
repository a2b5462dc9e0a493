use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::Context;
use error::CliError;

/// Experiments for the wave equation on a linearly expanding interval.
#[derive(Parser, Debug)]
#[command(name = "movwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 when a report is outside its tolerance.
    #[arg(long, global = true)]
    assert: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Derived constants and sharp times.
    Geometry,
    /// Series solution on a space-time grid.
    Solve,
    /// Energy identity and decay envelope over a time grid.
    EnergyScan,
    /// One- and two-endpoint trace identities.
    Observe,
    /// Data whose boundary traces vanish on a short window.
    Counterexample,
    /// HUM control synthesis and null-control check.
    Control,
    /// Series against the characteristics solver.
    CompareOracle,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("--config is required"))?;
    let cfg = config::load(path)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context { cfg: &cfg, out: &out, assert: cli.assert };
    let report = match cli.command {
        Command::Geometry => commands::geometry(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::EnergyScan => commands::energy_scan(&ctx),
        Command::Observe => commands::observe(&ctx),
        Command::Counterexample => commands::counterexample(&ctx),
        Command::Control => commands::control(&ctx),
        Command::CompareOracle => commands::compare_oracle(&ctx),
    }?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::config(e.to_string().trim_end()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code)
        }
    }
}
