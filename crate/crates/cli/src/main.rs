//! `jeanie`: synthetic data, view simulation, alignment, training and
//! evaluation from the command line.

mod commands;
mod config;
mod data;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AlignArgs, EvalArgs, GenSynthArgs, RerunArgs, SimulateArgs, TrainArgs};
use config::{read_json, read_protocol, ExperimentConfig};
use error::{CliError, CliResult};

/// Worker-count cap for parallel stages.
const THREADS_ENV: &str = "JEANIE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "jeanie", version, about = "Joint temporal and viewpoint alignment of skeleton sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic SKEL-JSON corpus.
    GenSynth(GenSynthArgs),
    /// Write every view of a sequence over a view grid.
    SimulateViews(SimulateArgs),
    /// Print JEANIE, soft-DTW and FVM distances between two sequences.
    Align(AlignArgs),
    /// Episodic training; writes a checkpoint and the loss trace.
    Train(TrainArgs),
    /// Episodic evaluation; writes report.csv and plotdata.csv.
    Eval(EvalArgs),
    /// Repeat a run recorded in a manifest.
    Rerun(RerunArgs),
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Runtime(e.to_string()))
}

fn experiment_config(path: Option<&std::path::Path>) -> CliResult<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), read_json)
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::GenSynth(a) => commands::gen_synth(&a),
        Command::SimulateViews(a) => commands::simulate_views(&a),
        Command::Align(a) => commands::align(&a),
        Command::Train(a) => commands::train(&a, experiment_config(a.config.as_deref())?, read_protocol(&a.protocol)?),
        Command::Eval(a) => commands::eval(&a, experiment_config(a.config.as_deref())?, read_protocol(&a.protocol)?),
        Command::Rerun(a) => commands::rerun(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jeanie: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
