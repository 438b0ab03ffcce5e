//! `evosi` command-line driver.
//!
//! Exit status is 0 on success, 1 for invalid input (flags, config file,
//! model or parameter values) and 2 when a computation fails.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    AuditArgs, ConstantsArgs, F1Args, MeanderArgs, OutbreakArgs, ScalingArgs, SimulateArgs, StagesArgs, WalksArgs,
};
use config::{config_error, ConfigError, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "evosi", version, about = "Critical SI epidemics with rewiring on configuration-model graphs")]
struct Cli {
    /// TOML file of default settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for Monte Carlo batches [default: all cores]
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress progress messages on standard error
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form constants of a degree law
    Constants(ConstantsArgs),
    /// Check a degree sequence against the regularity assumptions
    Audit(AuditArgs),
    /// Raw trial records as JSON lines
    Simulate(SimulateArgs),
    /// Outbreak probability per size, as CSV
    Outbreak(OutbreakArgs),
    /// Outbreak probability over a size grid with the power-law fit
    Scaling(ScalingArgs),
    /// Survival of the upper and lower comparison walks
    Walks(WalksArgs),
    /// Meander endpoint sampling and the small-q slope
    Meander(MeanderArgs),
    /// Probability that the drifted diffusion started at level x crosses zero
    F1(F1Args),
    /// Conditional diagnostics for the early, takeoff and outbreak phases
    Stages(StagesArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let workers = match (cli.workers, file.top("workers")) {
        (Some(w), _) => Some(w),
        (None, Some(v)) => Some(
            v.as_u64()
                .ok_or_else(|| config_error("`workers` must be a positive integer"))? as usize,
        ),
        (None, None) => None,
    };
    if let Some(w) = workers {
        if w == 0 {
            return Err(config_error("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    let ctx = commands::Context { file, progress: !cli.quiet };
    match &cli.command {
        Command::Constants(a) => commands::constants(&ctx, a),
        Command::Audit(a) => commands::audit(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Outbreak(a) => commands::outbreak(&ctx, a),
        Command::Scaling(a) => commands::scaling(&ctx, a),
        Command::Walks(a) => commands::walks(&ctx, a),
        Command::Meander(a) => commands::meander(&ctx, a),
        Command::F1(a) => commands::f1(&ctx, a),
        Command::Stages(a) => commands::stages(&ctx, a),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use evosi::Error as E;
    if e.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<E>() {
        Some(
            E::InvalidModel(_)
            | E::InvalidParameter(_)
            | E::SubcriticalStructure { .. }
            | E::OddDegreeSum(_)
            | E::OutOfRange(_)
            | E::InvalidRegime(_),
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
