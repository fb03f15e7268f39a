//! Run configuration, read from a single TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. The config hash covers the configuration as written plus command-line
//! overrides, excluding the output directory, so two runs differing only in
//! where they write produce identical files.

use std::path::{Path, PathBuf};

use augdem_core::augment::{AugmentationType, FailurePolicy, ScheduleKind};
use augdem_core::data::{ColumnMapping, SyntheticPopulationSpec};
use augdem_core::predictor::{
    InferenceMode, PromptLanguage, RemoteEndpointConfig, NEAREST_NEIGHBOR_K,
};
use augdem_core::stats::DEFAULT_BOOTSTRAP_ITERATIONS;
use augdem_core::Attribute;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: Option<DataConfig>,
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub proposals: PathBuf,
    pub choices: PathBuf,
    pub demographics: PathBuf,
    #[serde(default)]
    pub columns: ColumnMapping,
}

/// A synthetic population. Without an explicit seed the generator seed is
/// derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub participant_count: usize,
    pub proposal_count: usize,
    pub demographic_effect_strength: f64,
    pub noise_scale: f64,
    pub pairs_per_participant: usize,
    pub seed: Option<u64>,
    /// Proposal table whose texts replace the generated ones, in row order.
    pub proposal_texts: Option<PathBuf>,
    /// Keep only the first `max_choices` generated choices.
    pub max_choices: Option<usize>,
}

impl SyntheticConfig {
    pub fn spec(&self, fallback_seed: u64) -> SyntheticPopulationSpec {
        SyntheticPopulationSpec {
            participant_count: self.participant_count,
            proposal_count: self.proposal_count,
            demographic_effect_strength: self.demographic_effect_strength,
            noise_scale: self.noise_scale,
            pairs_per_participant: self.pairs_per_participant,
            seed: self.seed.unwrap_or(fallback_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    #[serde(default = "default_language")]
    pub language: String,
    pub template: Option<PathBuf>,
}

fn default_language() -> String {
    "english".into()
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            language: default_language(),
            template: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    NearestNeighbor,
    Oracle,
    AlwaysFirst,
    Remote,
}

impl BackendKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "nearest-neighbor" => Some(Self::NearestNeighbor),
            "oracle" => Some(Self::Oracle),
            "always-first" => Some(Self::AlwaysFirst),
            "remote" => Some(Self::Remote),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default = "default_backend")]
    pub kind: BackendKind,
    #[serde(default = "default_order")]
    pub order: InferenceMode,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
    pub remote: Option<RemoteEndpointConfig>,
}

fn default_backend() -> BackendKind {
    BackendKind::NearestNeighbor
}
fn default_order() -> InferenceMode {
    InferenceMode::DualOrder
}
fn default_k() -> usize {
    NEAREST_NEIGHBOR_K
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: default_backend(),
            order: default_order(),
            k: default_k(),
            failure_policy: FailurePolicy::default(),
            remote: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Confidence level of every reported interval; there is no default.
    pub ci_level: Option<f64>,
    #[serde(default = "default_iterations")]
    pub bootstrap_iterations: usize,
    /// Test-set shares for the accuracy table.
    #[serde(default = "default_test_fractions")]
    pub test_fractions: Vec<f64>,
    /// Test-set share used by the bias and fine-tune export commands.
    #[serde(default = "default_half")]
    pub test_fraction: f64,
    #[serde(default = "default_adequacy_fractions")]
    pub adequacy_fractions: Vec<f64>,
    #[serde(default = "default_adequacy_repetitions")]
    pub adequacy_repetitions: usize,
    #[serde(default = "default_augment_fractions")]
    pub augment_fractions: Vec<f64>,
    #[serde(default = "default_augment_repetitions")]
    pub augment_repetitions: usize,
    #[serde(default = "default_augmentation")]
    pub augmentation: AugmentationType,
    #[serde(default = "default_extra_fraction")]
    pub extra_fraction: f64,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
    pub stratify_by: Option<String>,
    pub attribute: Option<String>,
    #[serde(default = "default_true")]
    pub balance: bool,
    #[serde(default)]
    pub plots: bool,
}

fn default_iterations() -> usize {
    DEFAULT_BOOTSTRAP_ITERATIONS
}
fn default_test_fractions() -> Vec<f64> {
    vec![0.05, 0.25, 0.5, 0.75]
}
fn default_half() -> f64 {
    0.5
}
fn default_adequacy_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}
fn default_adequacy_repetitions() -> usize {
    100
}
fn default_augment_fractions() -> Vec<f64> {
    vec![0.05, 0.25, 0.5]
}
fn default_augment_repetitions() -> usize {
    50
}
fn default_augmentation() -> AugmentationType {
    AugmentationType::IB
}
fn default_extra_fraction() -> f64 {
    0.2
}
fn default_schedule() -> ScheduleKind {
    ScheduleKind::Elicited
}
fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ci_level: None,
            bootstrap_iterations: default_iterations(),
            test_fractions: default_test_fractions(),
            test_fraction: default_half(),
            adequacy_fractions: default_adequacy_fractions(),
            adequacy_repetitions: default_adequacy_repetitions(),
            augment_fractions: default_augment_fractions(),
            augment_repetitions: default_augment_repetitions(),
            augmentation: default_augmentation(),
            extra_fraction: default_extra_fraction(),
            schedule: default_schedule(),
            stratify_by: None,
            attribute: None,
            balance: true,
            plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    #[serde(default = "default_finetune_backend")]
    pub backend: String,
    pub system_prompt: Option<String>,
}

fn default_finetune_backend() -> String {
    "gpt-3.5-turbo".into()
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            backend: default_finetune_backend(),
            system_prompt: None,
        }
    }
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: Option<String>,
    pub ci_level: Option<f64>,
    pub attribute: Option<String>,
}

/// A validated configuration with its base directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub hash: String,
}

impl LoadedConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(seed) = overrides.seed {
            config.seed = Some(seed);
        }
        if let Some(out) = &overrides.out {
            config.out = Some(out.clone());
        }
        if let Some(name) = &overrides.backend {
            config.backend.kind = BackendKind::from_name(name)
                .ok_or_else(|| CliError::Config(format!("unknown backend {name:?}")))?;
        }
        if let Some(level) = overrides.ci_level {
            config.experiment.ci_level = Some(level);
        }
        if let Some(attr) = &overrides.attribute {
            config.experiment.attribute = Some(attr.clone());
        }
        let seed = config.seed.ok_or_else(|| {
            CliError::Config("a master seed is required (config key `seed` or --seed)".into())
        })?;
        let out = config
            .out
            .clone()
            .map(|p| {
                if p.is_relative() && overrides.out.is_none() {
                    base_dir.join(p)
                } else {
                    p
                }
            })
            .ok_or_else(|| {
                CliError::Config(
                    "an output directory is required (config key `out` or --out)".into(),
                )
            })?;
        let loaded = Self {
            hash: config_hash(&config)?,
            config,
            base_dir,
            seed,
            out,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        match (&c.data, &c.synthetic) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "configure either [data] or [synthetic], not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "no data source: add [data] or [synthetic]".into(),
                ))
            }
            (Some(d), None) => {
                for p in [&d.proposals, &d.choices, &d.demographics] {
                    self.existing(p)?;
                }
            }
            (None, Some(s)) => {
                if let Some(p) = &s.proposal_texts {
                    self.existing(p)?;
                }
            }
        }
        if let Some(t) = &c.prompt.template {
            self.existing(t)?;
        }
        if PromptLanguage::from_name(&c.prompt.language).is_none() {
            return Err(CliError::Config(format!(
                "unknown prompt language {:?}",
                c.prompt.language
            )));
        }
        if c.backend.kind == BackendKind::Remote && c.backend.remote.is_none() {
            return Err(CliError::Config(
                "backend kind remote needs a [backend.remote] table".into(),
            ));
        }
        if let Some(level) = c.experiment.ci_level {
            if !(level > 0.0 && level < 1.0) {
                return Err(CliError::Config(format!(
                    "ci_level {level} is outside (0, 1)"
                )));
            }
        }
        for name in [&c.experiment.attribute, &c.experiment.stratify_by]
            .into_iter()
            .flatten()
        {
            parse_attribute(name)?;
        }
        Ok(())
    }

    fn existing(&self, p: &Path) -> Result<PathBuf, CliError> {
        let full = self.resolve(p);
        if full.is_file() {
            Ok(full)
        } else {
            Err(CliError::Config(format!(
                "referenced file {} does not exist",
                full.display()
            )))
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    /// The confidence level, which must be set explicitly.
    pub fn ci_level(&self) -> Result<f64, CliError> {
        self.config.experiment.ci_level.ok_or_else(|| {
            CliError::Config("experiment.ci_level must be set (for example 0.95 or 0.99)".into())
        })
    }

    pub fn attribute(&self) -> Result<Attribute, CliError> {
        let name = self.config.experiment.attribute.as_deref().ok_or_else(|| {
            CliError::Config(
                "an attribute is required (experiment.attribute or --attribute)".into(),
            )
        })?;
        parse_attribute(name)
    }

    pub fn language(&self) -> PromptLanguage {
        PromptLanguage::from_name(&self.config.prompt.language).expect("validated at load")
    }
}

pub fn parse_attribute(name: &str) -> Result<Attribute, CliError> {
    Attribute::from_name(name)
        .ok_or_else(|| CliError::Config(format!("unknown attribute {name:?}")))
}

fn config_hash(config: &RunConfig) -> Result<String, CliError> {
    let mut hashed = config.clone();
    hashed.out = None;
    let canonical = toml::to_string(&hashed).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const SYNTH: &str = r#"
seed = 7
out = "results"
[synthetic]
participant_count = 20
proposal_count = 5
demographic_effect_strength = 0.5
noise_scale = 1.0
pairs_per_participant = 3
"#;

    #[test]
    fn loads_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "run.toml", SYNTH);
        let a = LoadedConfig::load(&p, &Overrides::default()).unwrap();
        assert_eq!(a.seed, 7);
        assert_eq!(a.out, dir.path().join("results"));
        let b = LoadedConfig::load(
            &p,
            &Overrides {
                out: Some("elsewhere".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.hash, b.hash);
        let c = LoadedConfig::load(
            &p,
            &Overrides {
                seed: Some(8),
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a.hash, c.hash);
        assert!(a.ci_level().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let no_seed = write(dir.path(), "a.toml", &SYNTH.replace("seed = 7", ""));
        assert!(LoadedConfig::load(&no_seed, &Overrides::default()).is_err());
        let two_sources = write(
            dir.path(),
            "b.toml",
            &format!("{SYNTH}\n[data]\nproposals = \"p.csv\"\nchoices = \"c.csv\"\ndemographics = \"d.csv\"\n"),
        );
        assert!(LoadedConfig::load(&two_sources, &Overrides::default()).is_err());
        let missing = write(
            dir.path(),
            "c.toml",
            "seed = 1\nout = \"o\"\n[data]\nproposals = \"p.csv\"\nchoices = \"c.csv\"\ndemographics = \"d.csv\"\n",
        );
        let err = LoadedConfig::load(&missing, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
        let temperature = write(
            dir.path(),
            "d.toml",
            &format!("{SYNTH}\n[backend]\nkind = \"remote\"\n[backend.remote]\nbase_url = \"http://x\"\nmodel = \"m\"\ntemperature = 0.7\n"),
        );
        assert!(LoadedConfig::load(&temperature, &Overrides::default()).is_err());
    }
}
