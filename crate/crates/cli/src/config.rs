//! The `run` configuration document.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use acal_core::{ExperimentConfig, LabelSpace, Seeds};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Either explicit class names or a class count (names become "0", "1", ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSpaceSpec {
    Count(usize),
    Names(Vec<String>),
}

impl LabelSpaceSpec {
    pub fn build(&self) -> Result<LabelSpace, CliError> {
        let space = match self {
            LabelSpaceSpec::Count(n) => LabelSpace::numbered(*n),
            LabelSpaceSpec::Names(names) => LabelSpace::new(names.iter().cloned()),
        };
        space.map_err(|e| CliError::Validation(format!("label_space: {e}")))
    }
}

/// A single seed used for split, model and strategy alike, or an explicit triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Single(u64),
    Triple(Seeds),
}

impl SeedSpec {
    pub fn seeds(self) -> Seeds {
        match self {
            SeedSpec::Single(s) => Seeds::all(s),
            SeedSpec::Triple(t) => t,
        }
    }
}

impl FromStr for SeedSpec {
    type Err = CliError;

    /// `7` or `split:model:strategy`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Validation(format!("--seeds: cannot parse {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.trim().parse::<u64>().map_err(|_| bad());
        match parts.as_slice() {
            [one] => Ok(SeedSpec::Single(num(one)?)),
            [split, model, strategy] => Ok(SeedSpec::Triple(Seeds {
                split: num(split)?,
                model: num(model)?,
                strategy: num(strategy)?,
            })),
            _ => Err(bad()),
        }
    }
}

pub fn parse_seed_list(list: &str) -> Result<Vec<SeedSpec>, CliError> {
    list.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(SeedSpec::from_str)
        .collect()
}

fn default_seeds() -> Vec<SeedSpec> {
    vec![SeedSpec::Single(0), SeedSpec::Single(1), SeedSpec::Single(2)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV with `sample_id,annotator_id,label`. Relative paths are resolved
    /// against the directory of the config file.
    pub annotations: PathBuf,
    /// CSV with `sample_id,v0,...`.
    pub embeddings: PathBuf,
    /// Optional JSON-lines file with `sample_id` and `text`.
    #[serde(default)]
    pub texts: Option<PathBuf>,
    pub label_space: LabelSpaceSpec,
    /// Expected embedding dimension, checked when given.
    #[serde(default)]
    pub embedding_dim: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<SeedSpec>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        config.experiment.validate()?;
        if config.seeds.is_empty() {
            return Err(CliError::Validation("seeds: at least one seed is required".into()));
        }
        Ok(config)
    }

    pub fn resolve(&self, base: &Path, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        }
    }
}
