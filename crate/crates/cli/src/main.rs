//! `kintrans` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure during training.

mod commands;
mod config;
mod output;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kintrans::{Arm, ErrorClass, Task};

use commands::Invocation;
use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] kintrans::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "kintrans",
    version,
    about = "Transformer models for surgical gesture and trajectory prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset from the [synth] table.
    Generate(Flags),
    /// Train one model on every trial.
    Train(Flags),
    /// Leave-one-user-out cross-validation.
    Evaluate(Flags),
    /// Run a trained model over a dataset.
    Infer(Flags),
    /// Recognition, gesture prediction and trajectory prediction in sequence.
    Chain(Flags),
    /// Rank architecture combinations on a 70/30 frame split.
    Gridsearch(Flags),
}

#[derive(Args, Debug)]
struct Flags {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    arm: Option<Arm>,
    /// Sampling rate in Hz after downsampling.
    #[arg(long)]
    rate: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Generate(f) => ("generate", f),
            Command::Train(f) => ("train", f),
            Command::Evaluate(f) => ("evaluate", f),
            Command::Infer(f) => ("infer", f),
            Command::Chain(f) => ("chain", f),
            Command::Gridsearch(f) => ("gridsearch", f),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, f) = cli.command.split();
    let flags = Overrides {
        task: f.task,
        arm: f.arm,
        rate_hz: f.rate,
        seed: f.seed,
        out: f.out,
    };
    let config = RunConfig::load(&f.config, command, &flags)?;
    Invocation {
        command,
        config_path: &f.config,
        config,
        flags,
        overwrite: f.overwrite,
    }
    .run()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
