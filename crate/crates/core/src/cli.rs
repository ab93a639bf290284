//! Command-line entry point. Each subcommand runs the matching experiment
//! kind from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::experiment::{plan, run, Report};

#[derive(Debug, Parser)]
#[command(name = "semilinear-heat", version, about = "Well-posedness checks and solvers for u_t = Δu + f(u) with L¹ data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the nonlinearity by its integral conditions
    Classify(RunArgs),
    /// Solve by monotone iteration (or maximal continuation)
    Solve(RunArgs),
    /// Check order preservation for phi <= psi
    Compare(RunArgs),
    /// Check the continuous-dependence bound for a data pair
    Cdep(RunArgs),
    /// Check the small-data global envelope and decay
    Global(RunArgs),
    /// Vary one nonlinearity parameter across values
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Validate and print the resolved plan without running
    #[arg(long)]
    pub dry_run: bool,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::Classify(a) => (ExperimentKind::Classify, a),
            Command::Solve(a) => (ExperimentKind::Solve, a),
            Command::Compare(a) => (ExperimentKind::Compare, a),
            Command::Cdep(a) => (ExperimentKind::Cdep, a),
            Command::Global(a) => (ExperimentKind::Global, a),
            Command::Sweep(a) => (ExperimentKind::Sweep, a),
        }
    }
}

/// Loads the config, applying the subcommand kind and seed override.
pub fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.experiment.kind = kind;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn summarize(report: &Report) {
    println!(
        "{} [{}]: {}",
        report.experiment,
        report.kind.name(),
        if report.passed { "pass" } else { "FAIL" }
    );
    for a in &report.assertions {
        println!("  {} {}: {}", if a.passed { "ok  " } else { "FAIL" }, a.name, a.detail);
        if let Some(w) = &a.witness {
            println!("       witness t={:e} x={:?} lhs={:e} rhs={:e}", w.t, w.x, w.lhs, w.rhs);
        }
    }
}

/// Exit codes: 0 all assertions hold, 1 invalid input or numerical error,
/// 2 an assertion failed (witness printed).
pub fn main_with(cli: Cli) -> ExitCode {
    let (kind, args) = cli.command.split();
    let outcome = resolve(kind, args).and_then(|config| {
        if args.dry_run {
            let p = plan(&config, &args.out)?;
            println!("{}", serde_json::to_string_pretty(&p)?);
            return Ok(None);
        }
        run(&config, &args.out, args.workers).map(Some)
    });
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            summarize(&report);
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
