//! Command-line front end: run a configured scenario, sweep a parameter, or
//! run the self-check suite.
//!
//! Exit codes: 0 on success, 1 when validation (or a run) fails, 2 for
//! configuration problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use leocoop::harness::{
    aggregate, emit_csv, run_trials, sweep, validate, ExperimentConfig, SweepParam,
};
use leocoop::Error;

#[derive(Parser)]
#[command(
    name = "leocoop",
    about = "Handover-aware power minimization for networked LEO downlinks: simulator, optimizer, and Monte-Carlo harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all trials of one configuration and write frames.csv/aggregate.csv
    Simulate {
        /// Flat key = value configuration file
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV artifacts
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the configuration file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one parameter over a list of values
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: rate_min, num_users, num_sats, p_ho_dbm
        #[arg(long)]
        param: String,
        /// Comma-separated list, e.g. 0.03,0.05,0.08
        #[arg(long)]
        values: String,
        /// Trials per sweep point
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cross-module self-check suite
    Validate {
        /// Skip the slower end-to-end checks
        #[arg(long)]
        fast: bool,
    },
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let rows = run_trials(&cfg)?;
            let aggregates = aggregate(&rows, "none", 0.0);
            emit_csv(&rows, &aggregates, &out)?;
            let feasible = rows.iter().filter(|r| r.status == "feasible").count();
            println!(
                "{} rows ({} feasible) -> {}",
                rows.len(),
                feasible,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            param,
            values,
            trials,
            out,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let param = SweepParam::parse(&param)?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("not a number: `{v}`")))
                })
                .collect::<Result<_, _>>()?;
            if trials == 0 {
                return Err(Error::Config("trials must be positive".into()));
            }
            let (rows, aggregates) = sweep(&cfg, param, &values, trials)?;
            emit_csv(&rows, &aggregates, &out)?;
            println!(
                "{} sweep points, {} rows -> {}",
                values.len(),
                rows.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { fast } => {
            let results = validate(fast);
            let mut failed = 0;
            for r in &results {
                println!(
                    "[{}] {} ({:.1} ms) {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.wall_ms,
                    r.detail
                );
                if !r.passed {
                    failed += 1;
                }
            }
            println!("{} checks, {} failed", results.len(), failed);
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
