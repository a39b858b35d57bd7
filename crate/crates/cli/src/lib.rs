//! Command surface for the semi-supervised AUC trainer: synthetic data,
//! LIBSVM splitting, training, prediction, grid search, benchmarks and
//! schedule diagnostics.
//!
//! Each subcommand reads an optional `--config` TOML file of flat key-value
//! pairs; flags override keys of the same name (dashes become underscores).
//! The resolved configuration is written as `config.toml` beside the outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    resolve, BenchArgs, BenchRun, CvArgs, CvRun, DiagArgs, DiagRun, PredictArgs, PredictRun,
    SplitArgs, SplitRun, SynthArgs, SynthRun, TrainArgs, TrainRun,
};
pub use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "qsgauc",
    version,
    about = "Semi-supervised AUC optimization with random Fourier features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct WithConfig<T: Args> {
    /// TOML file of flat key-value pairs; flags override its keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub args: T,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate two-Gaussian data with labeled, unlabeled and test pools
    Synth(WithConfig<SynthArgs>),
    /// Normalize a LIBSVM file and split it into labeled, unlabeled and test rows
    Split(WithConfig<SplitArgs>),
    /// Train a model on a split dataset
    Train(WithConfig<TrainArgs>),
    /// Score LIBSVM rows with a trained model
    Predict(WithConfig<PredictArgs>),
    /// Grid-search lambda, sigma and gamma by stratified cross-validation
    Cv(WithConfig<CvArgs>),
    /// Time the trainer against the exact kernel solver as the unlabeled pool grows
    Bench(WithConfig<BenchArgs>),
    /// Check the step-size schedule bounds and optionally the convergence rate
    Diag(WithConfig<DiagArgs>),
}

/// Runs one subcommand and returns the summary printed on success.
pub fn run(cli: Cli) -> Result<String> {
    Ok(match cli.command {
        Command::Synth(c) => {
            commands::synth(&resolve::<SynthRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
        Command::Split(c) => {
            commands::split(&resolve::<SplitRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
        Command::Train(c) => {
            commands::train(&resolve::<TrainRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
        Command::Predict(c) => {
            commands::predict(&resolve::<PredictRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
        Command::Cv(c) => {
            commands::cv(&resolve::<CvRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
        Command::Bench(c) => {
            commands::bench(&resolve::<BenchRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
        Command::Diag(c) => {
            commands::diag(&resolve::<DiagRun, _>(c.config.as_deref(), &c.args)?)?.to_string()
        }
    })
}
