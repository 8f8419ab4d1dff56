//! `fedhuber`: config-driven experiment runner for robust clustered
//! federated regression.
//!
//! Exit codes: 0 on success, 1 when any fit failed (the failed rows carry
//! NaN metrics), 2 on usage errors.

mod runner;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Error with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn usage(msg: String) -> Self {
        Self::Usage(msg)
    }

    pub fn runtime(msg: String) -> Self {
        Self::Runtime(msg)
    }

    pub fn runtime_from(err: fedhuber_core::Error) -> Self {
        Self::Runtime(err.to_string())
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Runtime(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fedhuber",
    about = "Simulate robust clustered federated regression experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (replication, method) cell of a spec and write rows.csv
    /// and summary.csv.
    Run {
        /// Flat key = value spec file.
        spec: PathBuf,
        /// Override a spec key, e.g. --set n=50.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Rerun the spec across a list of scenario values (h for s3, delta for
    /// s4) and write sweep.csv.
    Sweep {
        spec: PathBuf,
        /// Scenario knob to vary: h or delta.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 0,0.5,1,2.
        #[arg(long)]
        values: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Pick the step size and (K, s, q, lambda) by the selection criterion
    /// and write tuning.csv.
    Tune {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn load(spec: &PathBuf, set: &[String]) -> Result<spec::ExperimentSpec, Failure> {
    spec::build_spec(spec::load_keys(spec, set)?)
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Run { spec, set } => {
            let spec = load(&spec, &set)?;
            let (path, failed) = runner::run_experiment(&spec)?;
            println!("{}", path.display());
            Ok(failed)
        }
        Command::Sweep { spec, param, values, set } => {
            let spec = load(&spec, &set)?;
            let param = runner::SweepParam::parse(&param)?;
            let values: Vec<f64> = values
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Failure::usage(format!("cannot parse sweep value {v:?}")))
                })
                .collect::<Result<_, _>>()?;
            let (path, failed) = runner::run_sweep(&spec, param, &values)?;
            println!("{}", path.display());
            Ok(failed)
        }
        Command::Tune { spec, set } => {
            let spec = load(&spec, &set)?;
            let path = runner::run_tune(&spec)?;
            println!("{}", path.display());
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("one or more fits failed; their rows carry NaN metrics");
            ExitCode::from(1)
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
