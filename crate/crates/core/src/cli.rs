//! Command-line front end: `run`, `compare` and `validate`.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, ConfigError, ExperimentConfig};
use crate::env::{run_simulation, Policy, RunOutput, SimError};
use crate::report::{self, Comparison, SeedComparison};

#[derive(Debug, Parser)]
#[command(name = "bidsim", version, about = "Battery bidding simulator: MPC vs supervised actor-critic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Mpc,
    Sac,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Mpc => Policy::Mpc,
            PolicyArg::Sac => Policy::Sac,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one policy and write metrics, trace and series files.
    Run {
        /// JSON config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sac")]
        policy: PolicyArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run MPC and SAC on identical inputs and tabulate the results.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// First seed; further seeds count up from it.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Load and check a config, then print the resolved values.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("cannot write outputs to {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(SimError::Data(_)) => 2,
            _ => 1,
        }
    }
}

/// Writes to stdout; a closed pipe (`bidsim validate | head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(output_err(Path::new("<stdout>"))(e)),
        _ => Ok(()),
    }
}

fn load(config: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_config(config, std::env::vars())?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Simulates `policy` under `cfg` with the given seed.
pub fn simulate(
    cfg: &ExperimentConfig,
    config_dir: Option<&Path>,
    policy: Policy,
    seed: u64,
) -> Result<RunOutput, SimError> {
    let cfg = ExperimentConfig {
        seed,
        ..cfg.clone()
    };
    let demand = cfg.demand_series(config_dir)?;
    run_simulation(policy, &demand, &cfg.stack(), &cfg.simulation(), seed)
}

fn output_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

pub fn cmd_run(config: Option<&Path>, policy: Policy, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let cfg = load(config, seed)?;
    let output = simulate(&cfg, config.and_then(Path::parent), policy, cfg.seed)?;
    report::write_run(out, policy, cfg.seed, &output).map_err(output_err(out))?;
    emit(&report::metrics_json(policy, cfg.seed, &output.metrics.summary))
}

/// Runs both policies for `seeds` consecutive seeds, in parallel.
pub fn compare(
    cfg: &ExperimentConfig,
    config_dir: Option<&Path>,
    seeds: u64,
) -> Result<(Comparison, Vec<(RunOutput, RunOutput)>), SimError> {
    let results: Vec<Result<(RunOutput, RunOutput), SimError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..seeds.max(1))
            .map(|i| {
                let seed = cfg.seed + i;
                scope.spawn(move || {
                    let mpc = scope.spawn(move || simulate(cfg, config_dir, Policy::Mpc, seed));
                    let sac = simulate(cfg, config_dir, Policy::Sac, seed)?;
                    let mpc = mpc.join().expect("mpc simulation thread panicked")?;
                    Ok((mpc, sac))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let outputs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let runs = outputs
        .iter()
        .enumerate()
        .map(|(i, (mpc, sac))| {
            SeedComparison::new(
                cfg.seed + i as u64,
                mpc.metrics.summary.clone(),
                sac.metrics.summary.clone(),
            )
        })
        .collect();
    Ok((Comparison::new(runs), outputs))
}

pub fn cmd_compare(config: Option<&Path>, seed: Option<u64>, seeds: u64, out: &Path) -> Result<(), CliError> {
    let cfg = load(config, seed)?;
    let (comparison, outputs) = compare(&cfg, config.and_then(Path::parent), seeds)?;
    let (mpc, sac) = &outputs[0];
    report::write_run(&out.join("mpc"), Policy::Mpc, cfg.seed, mpc).map_err(output_err(out))?;
    report::write_run(&out.join("sac"), Policy::Sac, cfg.seed, sac).map_err(output_err(out))?;
    report::write_comparison(out, &comparison).map_err(output_err(out))?;
    emit(&comparison.table())
}

pub fn cmd_validate(config: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(config, None)?;
    let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
    text.push('\n');
    emit(&text)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            policy,
            seed,
            out,
        } => cmd_run(config.as_deref(), policy.into(), seed, &out),
        Command::Compare {
            config,
            seed,
            seeds,
            out,
        } => cmd_compare(config.as_deref(), seed, seeds, &out),
        Command::Validate { config } => cmd_validate(config.as_deref()),
    }
}

/// Parses process arguments, runs the command and maps failures to exit codes.
pub fn main_exit() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
