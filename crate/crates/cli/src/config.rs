//! Run configuration: one versioned JSON document.

use anyhow::{bail, Context, Result};
use clids_core::data::{FeatureSelection, Schema};
use clids_core::model::ModelKind;
use clids_core::search::SearchSpace;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub features: FeatureSelection,
    #[serde(default)]
    pub prune: Option<PruneConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub search: Option<SearchConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Held-out share of `train` when no test file is given.
    #[serde(default)]
    pub test_fraction: Option<f64>,
    pub schema: SchemaSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSpec {
    Preset(String),
    Custom(Schema),
}

impl SchemaSpec {
    pub fn resolve(&self) -> Result<Schema> {
        match self {
            SchemaSpec::Preset(name) if name == "nsl_kdd" => Ok(Schema::nsl_kdd()),
            SchemaSpec::Preset(name) => bail!("unknown schema preset {name:?} (known: nsl_kdd)"),
            SchemaSpec::Custom(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Trainer parameters; omitted fields take their defaults.
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: usize,
    pub space: SearchSpace,
    /// Share of the training rows held out to score each trial.
    #[serde(default = "default_validation")]
    pub validation_fraction: f64,
}

fn default_validation() -> f64 {
    0.2
}

impl RunConfig {
    /// Reads a config; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.config_version != CONFIG_VERSION {
            bail!("config_version {} is not supported (expected {CONFIG_VERSION})", cfg.config_version);
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.data.train);
        if let Some(t) = cfg.data.test.as_mut() {
            fix(t);
        }
        if let Some(o) = cfg.output_dir.as_mut() {
            fix(o);
        }
        if !cfg.model.params.is_object() {
            bail!("model.params must be a JSON object");
        }
        Ok(cfg)
    }
}
