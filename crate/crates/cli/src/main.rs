use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use kfp_cli::config::{ConfigError, RunConfig, SweepConfig};
use kfp_cli::report::Report;
use kfp_cli::{pipeline, snapshot, sweep};

/// Kinetic Fokker-Planck regularity lab.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one config and run its diagnostic stages.
    Run {
        config: PathBuf,
        /// Overrides `output` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an ensemble; the worker count comes from KFP_WORKERS when set.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a snapshot header and value statistics.
    Inspect { snapshot: PathBuf },
    /// Render the summary of a run or sweep directory.
    Report { dir: PathBuf },
}

const AUDIT_FAILED: u8 = 1;
const CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(AUDIT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(CONFIG_ERROR)
            } else {
                ExitCode::from(AUDIT_FAILED)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, output } => {
            let mut cfg = RunConfig::load(&config)?;
            if output.is_some() {
                cfg.output = output;
            }
            let outcome = pipeline::run_config(&cfg)?;
            let report = Report::Run(Box::new(outcome.summary));
            print!("{}", report.render());
            Ok(report.passed())
        }
        Command::Sweep { config, output } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let (_, summary) = sweep::run_sweep(&cfg)?;
            let report = Report::Sweep(summary);
            print!("{}", report.render());
            Ok(report.passed())
        }
        Command::Inspect { snapshot: path } => {
            let h = snapshot::read_header(&path)?;
            let traj = snapshot::import_snapshot(&path)?;
            println!("format {} dim {}", h.version, h.dim);
            println!("grid {} x {} on x [{}, {}], v [{}, {}]", h.nx, h.nv, h.x.0, h.x.1, h.v.0, h.v.1);
            let (t0, t1) = (h.times.first().copied().unwrap_or(f64::NAN), h.times.last().copied().unwrap_or(f64::NAN));
            println!("slices {} from t = {t0} to t = {t1}, dt {}", h.times.len(), h.dt);
            println!("min {:.6e} max {:.6e}", traj.min(), traj.max());
            Ok(true)
        }
        Command::Report { dir } => {
            let report = Report::load(&dir)?;
            print!("{}", report.render());
            Ok(report.passed())
        }
    }
}
