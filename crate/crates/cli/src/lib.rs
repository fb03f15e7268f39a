//! Command-line harness for preference-aggregation experiments.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::{LoadedConfig, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "augdem",
    version,
    about = "Aggregate pairwise preferences and run augmentation experiments"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Predictor backend; overrides `backend.kind`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Confidence level of reported intervals; overrides `experiment.ci_level`.
    #[arg(long, global = true)]
    pub ci_level: Option<f64>,
    /// Demographic attribute; overrides `experiment.attribute`.
    #[arg(long, global = true)]
    pub attribute: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Load and validate the dataset, print its manifest.
    Ingest,
    /// Rank proposals by win rate.
    Winrates,
    /// Win-rate agreement of disjoint samples by sample size.
    Adequacy,
    /// Predictor accuracy on held-out participants.
    Accuracy,
    /// Predictor accuracy by demographic subgroup.
    Bias,
    /// Plain versus augmented samples.
    AugmentEval,
    /// Write a fine-tuning dataset and hyperparameters.
    ExportFinetune,
    /// Write a synthetic population as input tables.
    Synth,
}

impl Cli {
    pub fn run(&self) -> Result<String, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            backend: self.backend.clone(),
            ci_level: self.ci_level,
            attribute: self.attribute.clone(),
        };
        let run = Run::new(LoadedConfig::load(path, &overrides)?);
        match self.command {
            Command::Ingest => run.ingest(),
            Command::Winrates => run.winrates(),
            Command::Adequacy => run.adequacy(),
            Command::Accuracy => run.accuracy(),
            Command::Bias => run.bias(),
            Command::AugmentEval => run.augment_eval(),
            Command::ExportFinetune => run.export_finetune(),
            Command::Synth => run.synth(),
        }
    }
}
