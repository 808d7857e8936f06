use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thanos_cli::{bounds_report, exit, run_experiment, CliError, ExperimentConfig, RunOverrides};

/// Decentralized sparse PCA over the Stiefel manifold.
#[derive(Debug, Parser)]
#[command(name = "thanos", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write per-round metrics as CSV.
    Run {
        config: PathBuf,
        /// Overrides `output.metrics`.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Treat the first row of a CSV data file as a header.
        #[arg(long)]
        csv_header: bool,
        /// Sign-align columns against the reference before measuring distance.
        #[arg(long)]
        align_columns: bool,
        /// Worker threads. Results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the sufficient bounds on beta and eta for a config.
    Bounds { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, metrics, csv_header, align_columns, threads } => {
            if let Some(t) = threads {
                if t == 0 {
                    return Err(CliError::Config(vec!["--threads: must be at least 1".into()]));
                }
                // Only fails if a pool already exists, which cannot happen here.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            let config = ExperimentConfig::load(&config)?;
            let overrides = RunOverrides { metrics, csv_header, align_columns };
            let summary = run_experiment(&config, &overrides)?;
            println!("{summary}");
        }
        Command::Bounds { config } => {
            let config = ExperimentConfig::load(&config)?;
            println!("{}", bounds_report(&config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
