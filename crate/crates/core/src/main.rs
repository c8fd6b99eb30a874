use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use pifnet::config::{parse_config, Format};
use pifnet::harness::{dispatch, Command, DispatchOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    Simulate,
    Fluid,
    Analyze,
    Verify,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

/// Simulator and analysis toolkit for inhibitory integrate-and-fire networks.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Subcommand,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Check to run with `verify`; repeatable.
    #[arg(long = "check")]
    checks: Vec<String>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let command = match cli.command {
        Subcommand::Simulate => Command::Simulate,
        Subcommand::Fluid => Command::Fluid,
        Subcommand::Analyze => Command::Analyze,
        Subcommand::Verify => Command::Verify,
    };
    let options = DispatchOptions {
        out_dir: cli.out,
        checks: cli.checks,
        format: cli.format.map(|f| match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
        }),
    };
    eprintln!("seed {} (pifnet {})", config.seed(), env!("CARGO_PKG_VERSION"));
    match dispatch(command, &config, &options) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
