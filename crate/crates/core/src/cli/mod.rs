//! Batch front end: config files in, artifact directories out.

mod config;
mod runner;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{
    BathConfig, BoundsPreset, BoundsSpec, ExperimentConfig, FitConfig, OutputConfig, SweepAxes,
};
pub use runner::{
    error_json, fit_bath, fmt_num, resolve_terms, run_experiment, run_fit, run_propagation,
    run_sweep, starting_pulse, write_error, write_pulse_csv, write_run, write_sweep,
    write_trajectory_csv, RunArtifacts,
};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "nmkrotov", version, about = "Gate control of a qubit in a non-Markovian bath")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write `trajectory.csv`.
    #[arg(long, global = true)]
    pub emit_trajectory: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit (Ohmic), optimize and analyze one configuration.
    Run { config: PathBuf },
    /// Run every cell of the configured grid.
    Sweep { config: PathBuf },
    /// Fit the Ohmic kernel and write `terms.json`.
    FitBath { config: PathBuf },
    /// Propagate the starting pulse without optimizing.
    Propagate { config: PathBuf },
}

impl Command {
    fn config_path(&self) -> &PathBuf {
        match self {
            Command::Run { config }
            | Command::Sweep { config }
            | Command::FitBath { config }
            | Command::Propagate { config } => config,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(cli.command.config_path())?;
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    config.output.emit_trajectory |= cli.emit_trajectory;
    Ok(config)
}

fn dispatch(cli: &Cli, config: &ExperimentConfig) -> Result<i32> {
    let dir = &config.output.dir;
    match cli.command {
        Command::Run { .. } => {
            let artifacts = run_experiment(config)?;
            write_run(&artifacts, dir, config.output.emit_trajectory)?;
            let r = &artifacts.record;
            println!(
                "E0 = {:.3e}  Es = {:.3e}  iterations = {}  ({:?})",
                r.initial_error, r.final_error, r.iterations_run, r.stop_reason
            );
            Ok(0)
        }
        Command::Sweep { .. } => {
            let result = run_sweep(config, dir, cli.threads)?;
            write_sweep(&result, dir)?;
            let failed = result.failed_cells();
            println!("{} cells, {failed} failed", result.cells.len());
            Ok(if failed == result.cells.len() { 1 } else { 0 })
        }
        Command::FitBath { .. } => {
            let report = run_fit(config, dir)?;
            println!(
                "K = {}  relative residual = {:.3e}",
                report.term_count, report.relative_l2_residual
            );
            Ok(0)
        }
        Command::Propagate { .. } => {
            run_propagation(config, dir)?;
            Ok(0)
        }
    }
}

/// Executes a parsed command line and returns the process exit code.
///
/// Failures print a JSON error report on stderr and, when the output
/// directory is known, also write it to `error.json` there.
pub fn execute(cli: &Cli) -> i32 {
    let config = match load(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            if let Some(out) = &cli.out {
                let _ = write_error(out, &e);
            }
            return 2;
        }
    };
    match dispatch(cli, &config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            let _ = write_error(&config.output.dir, &e);
            1
        }
    }
}
