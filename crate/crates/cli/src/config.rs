//! Run configuration files.
//!
//! ```toml
//! name = "sepsis"
//! mode = "streaming"
//! models = ["fpt", "bag", "ngram3", "soft", { kind = "alergia", alpha = 0.1 }]
//!
//! [dataset]
//! path = "../data/sepsis.csv"
//!
//! [outputs]
//! dir = "out/sepsis-streaming"
//! ```
//!
//! Model entries are compact names or full tables. Compact ensemble names
//! (`soft`, `hard`, `adaptive`, `fallback`) expand with `recipe`, or with
//! the per-dataset recipe for a known `name`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use streampredict::ingest::{DatasetConfig, SplitSpec};
use streampredict::models::{check_unique_names, ModelError, ModelSpec, VotingRecipe};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("override {key}: {msg}")]
    OverridePath { key: String, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Batch,
    #[default]
    Streaming,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Batch => "batch",
            Mode::Streaming => "streaming",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Compact(String),
    Full(ModelSpec),
}

fn default_runs() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    pub table: String,
    /// Streaming only.
    pub curve: String,
    /// Batch only: per-model mean and standard deviation over the runs.
    pub summary: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            dir: PathBuf::from("out"),
            table: "table.tsv".into(),
            curve: "curve.csv".into(),
            summary: "summary.tsv".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Benchmark name; picks the voting recipe when `recipe` is absent.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub dataset: DatasetConfig,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub recipe: Option<VotingRecipe>,
    #[serde(default)]
    pub split: SplitSpec,
    /// Number of seeded batch runs to average.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    /// Reads `path`, applies `key=value` overrides and resolves the dataset
    /// path against the config's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, overrides).map_err(|e| match e {
            ConfigError::Parse { msg, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })?;
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let parse_err = |msg: String| ConfigError::Parse {
            path: PathBuf::new(),
            msg,
        };
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(e.to_string()))
    }

    pub fn recipe(&self) -> VotingRecipe {
        self.recipe
            .or_else(|| self.name.as_deref().and_then(VotingRecipe::for_dataset))
            .unwrap_or_default()
    }

    /// Expands compact entries and validates every model.
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>, ConfigError> {
        let recipe = self.recipe();
        let specs = self
            .models
            .iter()
            .map(|m| match m {
                ModelEntry::Compact(s) => ModelSpec::from_compact(s, &recipe),
                ModelEntry::Full(spec) => Ok(spec.clone()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        for s in &specs {
            s.validate()?;
        }
        check_unique_names(&specs)?;
        Ok(specs)
    }

    pub fn validate(&self) -> Result<Vec<ModelSpec>, ConfigError> {
        if self.models.is_empty() {
            return Err(ConfigError::Invalid("no models configured".into()));
        }
        if self.mode == Mode::Batch && self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be at least 1".into()));
        }
        self.split.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.dataset
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.model_specs()
    }
}

/// Parses an override value as a TOML value, falling back to a plain string.
/// `models` also accepts a comma-separated list of compact names.
fn override_value(key: &str, raw: &str) -> toml::Value {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"));
    match parsed {
        Some(v) if key != "models" || v.is_array() => v,
        _ if key == "models" => toml::Value::Array(
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| toml::Value::String(s.to_string()))
                .collect(),
        ),
        Some(v) => v,
        None => toml::Value::String(raw.to_string()),
    }
}

/// Sets a dotted key such as `split.seed=3` or `models=ngram5,soft`.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(spec.to_string()));
    }
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::OverridePath {
                key: key.to_string(),
                msg: format!("`{p}` is not a table"),
            })?;
    }
    cur.insert(last.to_string(), override_value(key, raw.trim()));
    Ok(())
}
