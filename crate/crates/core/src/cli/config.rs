//! Run configuration: a TOML file with `[model]`, `[train]`, `[decode]` and
//! `[data]` sections. Every field has a default; environment variables can
//! override paths only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PtsError, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub max_iter: usize,
    pub batch_size: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            max_iter: 10,
            batch_size: 32,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub keys: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub max_vocab: Option<usize>,
    pub max_keys: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub data: DataConfig,
}

type PathField = fn(&mut DataConfig) -> &mut Option<PathBuf>;

/// Environment variables that may replace a configured path.
pub const PATH_OVERRIDES: [(&str, PathField); 7] = [
    ("PTS_TRAIN", |d| &mut d.train),
    ("PTS_VALID", |d| &mut d.valid),
    ("PTS_TEST", |d| &mut d.test),
    ("PTS_VOCAB", |d| &mut d.vocab),
    ("PTS_KEYS", |d| &mut d.keys),
    ("PTS_CHECKPOINT", |d| &mut d.checkpoint),
    ("PTS_STOPWORDS", |d| &mut d.stopwords),
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| PtsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies path overrides from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(PtsError::MissingFile(path.to_owned()));
        }
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        cfg.apply_env(|k| std::env::var_os(k).map(PathBuf::from));
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<PathBuf>) {
        for (var, field) in PATH_OVERRIDES {
            if let Some(p) = lookup(var) {
                *field(&mut self.data) = Some(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        // vocabulary sizes are filled in from the data, so check the rest
        let mut model = self.model.clone();
        model.vocab_size = model.vocab_size.max(crate::corpus::vocab::RESERVED.len());
        model.key_vocab_size = model.key_vocab_size.max(crate::corpus::vocab::RESERVED.len());
        model.validate()?;
        self.train.validate()?;
        if self.decode.batch_size == 0 {
            return Err(PtsError::Config("decode.batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

/// Returns the path or a "missing" error naming the setting.
pub fn require_path<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| PtsError::Config(format!("no {what} path configured")))?;
    if !p.exists() {
        return Err(PtsError::MissingFile(p.to_owned()));
    }
    Ok(p)
}
