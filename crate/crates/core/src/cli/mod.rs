//! Command-line front end: configuration, subcommands and CSV output.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::decoy::{estimate_bounds, read_gain_table};
use crate::keyrate::evaluate;
use crate::optics::{gains_from_yields, ChannelParams};
use crate::optimize::{sweep, LossRange};
use crate::source::SourceDistributions;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Malformed(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "mdi-decoy",
    version,
    about = "Decoy-state MDI-QKD key-rate simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file with one `key = value` per line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides a configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Write CSV here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for loss sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulated gains and error rates of every source pair at `loss_db`.
    Gains,
    /// Decoy bounds at `loss_db`, or from measured gains in `gains_file`.
    Bounds,
    /// All key rates and the quantities behind them at `loss_db`.
    Rate,
    /// Fixed-intensity rates over the loss range.
    Sweep,
    /// Optimal intensities and rates per protocol over the loss range.
    Optimize,
}

impl Cli {
    /// Configuration file (if any) followed by `--set` overrides and `--out`.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for assignment in &self.set {
            let (key, value) = config::split_assignment(assignment)?;
            config.set(key, value)?;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        Ok(config)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.parallel == 0 {
        return Err(CliError::BadValue {
            key: "parallel".into(),
            value: "0".into(),
            reason: "need at least one thread".into(),
        });
    }
    let config = cli.resolve_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.parallel)
        .build()
        .map_err(|e| CliError::Unsupported(format!("thread pool: {e}")))?;
    let mut buffer = Vec::new();
    pool.install(|| execute(cli.command, &config, &mut buffer))?;
    let mut out: Box<dyn Write> = match &config.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
            CliError::Io {
                path: path.clone(),
                source,
            }
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    out.write_all(&buffer)?;
    out.flush()?;
    Ok(())
}

/// Runs one subcommand and writes its CSV to `out`.
pub fn execute(command: Command, config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Bounds if config.gains_file.is_some() => {
            let path = config.gains_file.as_ref().expect("checked");
            let file = File::open(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let gains = read_gain_table(io::BufReader::new(file))?;
            let dists = SourceDistributions::poisson(&config.sources()?, config.tail_epsilon)?;
            let bounds = estimate_bounds(&gains, &dists)?;
            output::write_bounds(out, &bounds, None)?;
        }
        Command::Gains | Command::Bounds | Command::Rate => {
            let sweep_config = config.sweep_config(LossRange::single(config.loss_db), false)?;
            sweep_config.validate()?;
            let sim = sweep_config.simulator()?;
            let yields = sim.yields(&ChannelParams::new(config.loss_db)?);
            match command {
                Command::Gains => {
                    let dists = sim.distributions(&sweep_config.sources)?;
                    output::write_gains(out, &gains_from_yields(&yields, &dists)?)?;
                }
                _ => {
                    let report =
                        evaluate(&sim, &yields, &sweep_config.sources, &sweep_config.protocol)?;
                    if command == Command::Rate {
                        output::write_rate(out, &report)?;
                    } else {
                        let truth = (report.loss_db, report.s11_true, report.e11_x_true);
                        output::write_bounds(out, &report.bounds, Some(truth))?;
                    }
                }
            }
        }
        Command::Sweep => {
            let points = sweep(&config.sweep_config(config.loss_range()?, false)?)?;
            output::write_sweep(out, &points)?;
        }
        Command::Optimize => {
            if !config.is_symmetric() {
                return Err(CliError::Unsupported(
                    "optimization assumes both parties use the same intensities".into(),
                ));
            }
            let points = sweep(&config.sweep_config(config.loss_range()?, true)?)?;
            output::write_optima(out, &points)?;
        }
    }
    Ok(())
}
