use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pulsecal::config::SnapshotSpec;
use pulsecal::{CliError, ExperimentConfig, OutDir, Overrides};

#[derive(Parser)]
#[command(version, about = "Iterative deconvolution calibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// AWG snapshots to keep in the calibration history.
    #[arg(long, global = true, value_enum)]
    snapshots: Option<SnapshotSpec>,

    /// Fine grid points per AWG period.
    #[arg(long, global = true)]
    oversampling: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Learning loop plus one-shot deconvolution baseline.
    Calibrate { config: PathBuf },
    /// Overshoot and decay time over a grid of second-order plants.
    Sweep { config: PathBuf },
    /// Phase comparison of each reference model against the plant.
    Stability { config: PathBuf },
    /// Accumulated phase deviation at several sampling periods.
    Ramsey { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = match &cli.command {
        Command::Calibrate { config }
        | Command::Sweep { config }
        | Command::Stability { config }
        | Command::Ramsey { config } => config.clone(),
    };
    let overrides = Overrides {
        snapshots: cli.snapshots,
        oversampling: cli.oversampling,
    };
    let config = overrides
        .apply(ExperimentConfig::load(&path)?)
        .map_err(|m| CliError::config(&path, m))?;
    let out = OutDir::create(&cli.out)?;
    let summary = match cli.command {
        Command::Calibrate { .. } => pulsecal::cmd_calibrate(&config, &out),
        Command::Sweep { .. } => pulsecal::cmd_sweep(&config, &out),
        Command::Stability { .. } => pulsecal::cmd_stability(&config, &out),
        Command::Ramsey { .. } => pulsecal::cmd_ramsey(&config, &out),
    }
    .map_err(|e| match e {
        CliError::Config { path: p, message } if p.as_os_str().is_empty() => {
            CliError::config(&path, message)
        }
        other => other,
    })?;
    if let Some(status) = summary.get("status") {
        println!("status: {}", status.as_str().unwrap_or_default());
    }
    println!("wrote {}", out.path("summary.toml").display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
