use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use driftwidth::commands::{self, print_line, summary_line, SweepOptions};
use driftwidth::{CliError, ExperimentConfig};

/// Drift detection from prediction-interval width.
#[derive(Parser)]
#[command(name = "driftwidth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic stream as CSV (`--out` is the file path).
    Gen(Common),
    /// Run one prequential experiment into `--out`.
    Run(Common),
    /// Run every configured seed into `--out` and aggregate.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seeds listed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => {
            let config = ExperimentConfig::load(&args.config)?;
            let seed = commands::single_seed(&config, args.seed)?;
            commands::gen(&config, seed, &args.out)
        }
        Command::Run(args) => {
            let config = ExperimentConfig::load(&args.config)?;
            let seed = commands::single_seed(&config, args.seed)?;
            let record = commands::run(&config, seed, &args.out)?;
            if !args.quiet {
                print_line(&summary_line(&record));
            }
            Ok(())
        }
        Command::Sweep(args) => {
            let mut config = ExperimentConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                config.seeds = vec![seed];
            }
            let opts = SweepOptions {
                quiet: args.quiet,
                ..SweepOptions::default()
            };
            commands::sweep(&config, &args.out, &opts).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("driftwidth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
