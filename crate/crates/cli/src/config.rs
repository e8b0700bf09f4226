//! Settings resolution: command-line flags, then `UPRPRC_*` environment
//! variables (both handled by clap), then the TOML config file, then
//! built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::Deserialize;
use uprprc_core::translate::{
    DictionaryTranslator, ExternalConfig, ExternalProcessTranslator, IdentityTranslator, Translator,
};

/// Error in the invocation itself; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub drop_threshold: Option<f64>,
    pub translator: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub flatten_tables: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranslatorSpec {
    Identity,
    Dict(PathBuf),
    External(String),
}

impl FromStr for TranslatorSpec {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "identity" {
            return Ok(TranslatorSpec::Identity);
        }
        if let Some(path) = s.strip_prefix("dict:") {
            return Ok(TranslatorSpec::Dict(PathBuf::from(path)));
        }
        if let Some(cmd) = s.strip_prefix("external:") {
            if !cmd.trim().is_empty() {
                return Ok(TranslatorSpec::External(cmd.to_string()));
            }
        }
        Err(UsageError(format!(
            "unknown translator {s:?}; expected identity, dict:<path> or external:<command>"
        )))
    }
}

impl fmt::Display for TranslatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranslatorSpec::Identity => f.write_str("identity"),
            TranslatorSpec::Dict(p) => write!(f, "dict:{}", p.display()),
            TranslatorSpec::External(c) => write!(f, "external:{c}"),
        }
    }
}

/// Everything an alignment run needs, fully resolved.
#[derive(Debug, Clone)]
pub struct AlignSettings {
    pub drop_threshold: f64,
    pub translator: TranslatorSpec,
    pub cache_dir: Option<PathBuf>,
    pub flatten_tables: bool,
}

impl AlignSettings {
    pub fn resolve(
        drop_threshold: Option<f64>,
        translator: Option<String>,
        cache_dir: Option<PathBuf>,
        no_flatten: bool,
        file: &FileConfig,
    ) -> Result<Self> {
        let drop_threshold = drop_threshold
            .or(file.drop_threshold)
            .unwrap_or(uprprc_core::DEFAULT_DROP_THRESHOLD);
        if !(0.0..=1.0).contains(&drop_threshold) {
            return Err(usage(format!("drop threshold {drop_threshold} is outside [0, 1]")));
        }
        let translator = translator
            .or_else(|| file.translator.clone())
            .unwrap_or_else(|| "identity".into())
            .parse::<TranslatorSpec>()?;
        Ok(AlignSettings {
            drop_threshold,
            translator,
            cache_dir: cache_dir.or_else(|| file.cache_dir.clone()),
            flatten_tables: !no_flatten && file.flatten_tables.unwrap_or(true),
        })
    }

    pub fn build_translator(&self) -> Result<Box<dyn Translator>> {
        Ok(match &self.translator {
            TranslatorSpec::Identity => Box::new(IdentityTranslator),
            TranslatorSpec::Dict(path) => Box::new(
                DictionaryTranslator::from_tsv(path)
                    .map_err(|e| usage(format!("cannot load dictionary {}: {e}", path.display())))?,
            ),
            TranslatorSpec::External(cmd) => Box::new(ExternalProcessTranslator::new(
                ExternalConfig::from_command_line(cmd, self.cache_dir.clone())
                    .context("invalid external translator")?,
            )),
        })
    }
}
