//! Run configuration: defaults, optional TOML file, flag overrides.
//!
//! Precedence is flags over config-file values over defaults; the
//! effective configuration is echoed into `summary.json` so every run
//! is auditable.

use crate::models::ModelKind;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const DEFAULT_PER_CLASS: usize = 30;
pub const DEFAULT_NUM_RUNS: usize = 50;
/// 1/√(2π): the classic Cobweb/3 floor. A floor of 1.0 hides most
/// pixel contrast from z-scored images and inverts the expected
/// convolutional-vs-raw ordering; this value keeps contrasts visible.
pub const DEFAULT_ACUITY: f64 = 0.3989422804014327;
pub const DEFAULT_FILTER_SIZE: usize = 3;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const BOOTSTRAP_LEVEL: f64 = 0.95;
pub const DEFAULT_LOWESS_FRAC: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Toml {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("missing required setting '{0}'")]
    Missing(&'static str),
    #[error("setting '{0}' must be positive")]
    NonPositive(&'static str),
    #[error("lowess fraction must be in (0, 1], got {0}")]
    BadFrac(f64),
    #[error("model list is empty")]
    NoModels,
    #[error("{0}")]
    BadModel(String),
    #[error("dataset file does not exist: {0}")]
    PathMissing(PathBuf),
    #[error("'{command}' requires exactly one model, got {got}")]
    OneModel { command: &'static str, got: usize },
}

/// A partial configuration, as read from a TOML file or CLI flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub seed: Option<u64>,
    pub per_class: Option<usize>,
    pub num_runs: Option<usize>,
    pub models: Option<Vec<String>>,
    pub acuity: Option<f64>,
    pub filter_size: Option<usize>,
    pub bootstrap_resamples: Option<usize>,
    pub lowess_frac: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl PartialConfig {
    pub fn from_toml_file(path: &Path) -> Result<PartialConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.display().to_string(),
            source: Box::new(source),
        })
    }

    /// Layer `over` on top of `self`: any setting present in `over`
    /// wins.
    pub fn overlay(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            images: over.images.or(self.images),
            labels: over.labels.or(self.labels),
            seed: over.seed.or(self.seed),
            per_class: over.per_class.or(self.per_class),
            num_runs: over.num_runs.or(self.num_runs),
            models: over.models.or(self.models),
            acuity: over.acuity.or(self.acuity),
            filter_size: over.filter_size.or(self.filter_size),
            bootstrap_resamples: over.bootstrap_resamples.or(self.bootstrap_resamples),
            lowess_frac: over.lowess_frac.or(self.lowess_frac),
            out_dir: over.out_dir.or(self.out_dir),
            workers: over.workers.or(self.workers),
        }
    }

    /// Apply defaults and validate. Dataset paths must exist.
    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let images = self.images.ok_or(ConfigError::Missing("images"))?;
        let labels = self.labels.ok_or(ConfigError::Missing("labels"))?;
        for path in [&images, &labels] {
            if !path.exists() {
                return Err(ConfigError::PathMissing(path.clone()));
            }
        }
        let models = match self.models {
            None => vec![ModelKind::Cobweb3, ModelKind::ConvCobweb],
            Some(names) => {
                let mut kinds = Vec::with_capacity(names.len());
                for name in names {
                    kinds.push(name.parse::<ModelKind>().map_err(ConfigError::BadModel)?);
                }
                kinds
            }
        };
        if models.is_empty() {
            return Err(ConfigError::NoModels);
        }
        let config = RunConfig {
            images,
            labels,
            seed: self.seed.unwrap_or(0),
            per_class: self.per_class.unwrap_or(DEFAULT_PER_CLASS),
            num_runs: self.num_runs.unwrap_or(DEFAULT_NUM_RUNS),
            models,
            acuity: self.acuity.unwrap_or(DEFAULT_ACUITY),
            filter_size: self.filter_size.unwrap_or(DEFAULT_FILTER_SIZE),
            bootstrap_resamples: self
                .bootstrap_resamples
                .unwrap_or(DEFAULT_BOOTSTRAP_RESAMPLES),
            lowess_frac: self.lowess_frac.unwrap_or(DEFAULT_LOWESS_FRAC),
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            workers: self
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        };
        if config.per_class == 0 {
            return Err(ConfigError::NonPositive("per_class"));
        }
        if config.num_runs == 0 {
            return Err(ConfigError::NonPositive("num_runs"));
        }
        if config.acuity <= 0.0 {
            return Err(ConfigError::NonPositive("acuity"));
        }
        if config.filter_size == 0 {
            return Err(ConfigError::NonPositive("filter_size"));
        }
        if config.bootstrap_resamples == 0 {
            return Err(ConfigError::NonPositive("bootstrap_resamples"));
        }
        if config.workers == 0 {
            return Err(ConfigError::NonPositive("workers"));
        }
        if !(config.lowess_frac > 0.0 && config.lowess_frac <= 1.0) {
            return Err(ConfigError::BadFrac(config.lowess_frac));
        }
        Ok(config)
    }
}

/// The fully resolved, validated configuration of one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub seed: u64,
    pub per_class: usize,
    pub num_runs: usize,
    pub models: Vec<ModelKind>,
    pub acuity: f64,
    pub filter_size: usize,
    pub bootstrap_resamples: usize,
    pub lowess_frac: f64,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl RunConfig {
    pub fn require_one_model(&self, command: &'static str) -> Result<ModelKind, ConfigError> {
        match self.models.as_slice() {
            [one] => Ok(*one),
            many => Err(ConfigError::OneModel {
                command,
                got: many.len(),
            }),
        }
    }
}
