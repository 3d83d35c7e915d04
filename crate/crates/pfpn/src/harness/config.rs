//! Experiment configuration: a closed JSON schema with sensible defaults,
//! dotted-key overrides, and a resolved snapshot so every run is
//! self-describing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::HeadKind;
use crate::resampling::ResampleConfig;
use crate::trainer::{EvalConfig, TrainerConfig};

/// Environment selection by name (`bandit1d`, `banditNd`, `pointmass2g`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: String,
    /// Action dimensions for `banditNd`.
    #[serde(default)]
    pub dims: Option<usize>,
}

/// Policy head selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub kind: HeadKind,
    /// Particles / bins / mixture components per action dimension.
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Trunk hidden layer sizes.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Initial standard deviation of the Gaussian head.
    #[serde(default = "default_gaussian_init_std")]
    pub gaussian_init_std: f64,
}

fn default_particles() -> usize {
    35
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_gaussian_init_std() -> f64 {
    0.5
}

fn default_workers() -> usize {
    1
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub head: HeadConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub resample: ResampleConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; defaults to `$PFPN_OUT_DIR`/<run name> when unset.
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if self.head.particles == 0 {
            return Err(Error::Config("head.particles must be >= 1".into()));
        }
        if self.head.hidden.is_empty() {
            return Err(Error::Config("head.hidden needs at least one layer".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.head.kind == HeadKind::Pfpn && self.resample.enabled {
            self.resample.validate(self.head.particles)?;
        }
        Ok(())
    }

    /// Deterministic run name used when `out_dir` is not set.
    pub fn run_name(&self) -> String {
        format!(
            "{}_{}{}_seed{}",
            self.env.name,
            match self.head.kind {
                HeadKind::Pfpn => "pfpn",
                HeadKind::Gaussian => "gaussian",
                HeadKind::Discrete => "discrete",
                HeadKind::Gmm => "gmm",
            },
            self.head.particles,
            self.seed
        )
    }
}

/// Parses a config file, applies `key=value` overrides on dotted paths, and
/// validates against the closed schema. Unknown keys are rejected by name.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    // path-aware deserialization so errors name the offending key
    let config: ExperimentConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| Error::Config(format!("{}: key `{}`: {}", path.display(), e.path(), e.inner())))?;
    config.validate()?;
    Ok(config)
}

/// Applies one `dotted.key=value` override onto the raw JSON document. The
/// value is parsed as JSON when possible and falls back to a string.
pub fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!("override `{spec}` must look like dotted.key=value"))
    })?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::Config(format!(
                "override `{spec}`: `{}` is not an object",
                keys[..i].join(".")
            )));
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == keys.len() {
            map.insert((*key).to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry((*key).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("override paths are non-empty")
}

/// Writes the fully resolved config next to the run artifacts.
pub fn write_resolved(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(config)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
