use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use challenge_dp::experiments::{run, Command, ExperimentConfig, Overrides};
use challenge_dp::Error;

/// Experiments for challenge-differentially-private online prediction.
#[derive(Debug, Parser)]
#[command(name = "cdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// TOML config file; flags take precedence over its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials (per bit value for audits).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Disable all Laplace noise.
    #[arg(long, global = true)]
    no_noise: bool,
    /// JSONL result file; TSV series are written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Hypothesis class file.
    #[arg(long, global = true, value_name = "PATH")]
    class: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Counter error envelope over a grid of horizons.
    CounterBench,
    /// One POP run with its full transcript.
    PopRun,
    /// Median mistakes over a grid of epsilon, dimension and horizon.
    PopSweep,
    /// Monte Carlo tail of the coin game.
    CoinGame,
    /// Empirical privacy audit of a built-in game.
    Audit,
    /// Exact Littlestone dimension of a class file.
    Ldim {
        /// Class file (same as --class).
        path: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Contract { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, positional) = match cli.command {
        Sub::CounterBench => (Command::CounterBench, None),
        Sub::PopRun => (Command::PopRun, None),
        Sub::PopSweep => (Command::PopSweep, None),
        Sub::CoinGame => (Command::CoinGame, None),
        Sub::Audit => (Command::Audit, None),
        Sub::Ldim { path } => (Command::Ldim, path),
    };
    let flags = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        workers: cli.workers,
        no_noise: cli.no_noise,
        out: cli.out,
        class: cli.class.or(positional),
    };
    let result = cli
        .config
        .map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
        .and_then(|c| c.resolve(command, flags))
        .and_then(|cfg| run(&cfg).map(|o| (cfg, o)));
    let (cfg, outcome) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("cdp: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    match &cfg.out {
        Some(path) => {
            if let Err(e) = outcome.write(&cfg, path, timestamp) {
                eprintln!("cdp: {e}");
                return ExitCode::from(2);
            }
            println!("{}", outcome.summary);
        }
        None if command == Command::Ldim => println!("{}", outcome.summary),
        None => match outcome.to_jsonl(&cfg, timestamp) {
            Ok(text) => print!("{text}"),
            Err(e) => {
                eprintln!("cdp: {e}");
                return ExitCode::from(2);
            }
        },
    }
    if let Some(v) = &outcome.violation {
        eprintln!("cdp: bound violation: {v}");
        return ExitCode::from(4);
    }
    ExitCode::SUCCESS
}
