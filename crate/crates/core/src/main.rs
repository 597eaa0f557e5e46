//! Batch runner: execute one configured solve or a parameter sweep, writing
//! convergence histories and final profiles as CSV.
//!
//! Exit codes: 0 converged, 2 stagnated, 3 diverged, 4 iteration budget
//! exhausted, 1 usage or configuration error.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thetafvm::config::RawConfig;
use thetafvm::runner::{run_and_write, sweep};
use thetafvm::stepping::Outcome;

#[derive(Parser)]
#[command(
    name = "thetafvm",
    version,
    about = "1D finite-volume theta-scheme solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run and write history.csv / profile.csv.
    Run {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's directory + "out").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-run a base configuration once per value of one parameter.
    Sweep {
        /// Path to the base JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key to vary, e.g. "controller.target".
        #[arg(long)]
        param: String,
        /// Comma-separated values; numbers where parseable, strings otherwise.
        #[arg(long)]
        values: String,
        /// Output directory (default: the config's directory + "sweep").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn outcome_exit(outcome: Outcome) -> ExitCode {
    match outcome {
        Outcome::Converged => ExitCode::SUCCESS,
        Outcome::Stagnated => ExitCode::from(2),
        Outcome::Diverged => ExitCode::from(3),
        Outcome::BudgetExhausted => ExitCode::from(4),
    }
}

fn load(config: &Path) -> Result<RawConfig, String> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
    RawConfig::from_json(&text).map_err(|e| format!("{}: {e}", config.display()))
}

fn default_out(config: &Path, name: &str) -> PathBuf {
    config.parent().unwrap_or(Path::new(".")).join(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run_command(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run { config, out_dir } => {
            let raw = load(&config)?;
            let run_config = raw.build().map_err(|e| e.to_string())?;
            let out = out_dir.unwrap_or_else(|| default_out(&config, "out"));
            let report = run_and_write(&run_config, &out).map_err(|e| e.to_string())?;
            println!(
                "outcome={:?} iterations={} final_residual={} out_dir={}",
                report.outcome,
                report.iterations,
                report.final_residual,
                out.display()
            );
            Ok(outcome_exit(report.outcome))
        }
        Command::Sweep {
            config,
            param,
            values,
            out_dir,
        } => {
            let raw = load(&config)?;
            let parsed: Vec<serde_json::Value> = values
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<f64>()
                        .ok()
                        .and_then(|x| {
                            serde_json::Number::from_f64(x).map(serde_json::Value::Number)
                        })
                        .unwrap_or_else(|| serde_json::Value::String(s.to_string()))
                })
                .collect();
            if parsed.is_empty() {
                return Err("no sweep values given".into());
            }
            let out = out_dir.unwrap_or_else(|| default_out(&config, "sweep"));
            let entries = sweep(&raw, &param, &parsed, &out).map_err(|e| e.to_string())?;
            for e in &entries {
                println!(
                    "{}={} outcome={:?} iterations={} final_residual={}",
                    param, e.value, e.outcome, e.iterations, e.final_residual
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
