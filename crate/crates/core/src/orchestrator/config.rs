use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzer::FuzzerConfig;
use crate::targets::{self, TargetError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed campaign config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid campaign config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Target(#[from] TargetError),
}

fn default_poll_interval() -> f64 {
    5.0
}

fn default_workers() -> usize {
    1
}

fn default_fuzzer() -> String {
    "baseline".to_owned()
}

fn default_true() -> bool {
    true
}

/// Settings for a set of repeated trials of one fuzzer against one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub target: String,
    pub trials: u32,
    pub duration_s: f64,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_s: f64,
    /// Directory of seed files; the target's built-in seeds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds_dir: Option<PathBuf>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Label identifying the fuzzer configuration in analysis output.
    #[serde(default = "default_fuzzer")]
    pub fuzzer: String,
    #[serde(default)]
    pub cmplog: bool,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    /// Run on a virtual clock at this rate instead of wall time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execs_per_sec: Option<f64>,
    /// Recorded with the campaign output; not enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_limit_mb: Option<u64>,
}

impl CampaignConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(target: &str, trials: u32, duration_s: f64) -> Self {
        Self {
            target: target.to_owned(),
            trials,
            duration_s,
            poll_interval_s: default_poll_interval(),
            seeds_dir: None,
            rng_seed: 0,
            workers: default_workers(),
            fuzzer: default_fuzzer(),
            cmplog: false,
            deterministic: true,
            execs_per_sec: None,
            memory_limit_mb: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; a relative `seeds_dir` resolves against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let mut config = Self::from_toml(&text)?;
        if let (Some(dir), Some(base)) = (&config.seeds_dir, path.parent()) {
            if dir.is_relative() {
                config.seeds_dir = Some(base.join(dir));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.to_owned()));
        targets::target(&self.target)?;
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return invalid("duration_s must be positive");
        }
        if !(self.poll_interval_s.is_finite() && self.poll_interval_s > 0.0) {
            return invalid("poll_interval_s must be positive");
        }
        if self.poll_interval_s > self.duration_s {
            return invalid("poll_interval_s must not exceed duration_s");
        }
        let ticks = self.duration_s / self.poll_interval_s;
        if (ticks - ticks.round()).abs() > 1e-9 * ticks.max(1.0) {
            return invalid("duration_s must be a whole multiple of poll_interval_s");
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1");
        }
        if let Some(rate) = self.execs_per_sec {
            if !(rate.is_finite() && rate > 0.0) {
                return invalid("execs_per_sec must be positive");
            }
        }
        if self.fuzzer.is_empty() {
            return invalid("fuzzer label must not be empty");
        }
        Ok(())
    }

    /// Number of poll ticks in one trial.
    pub fn poll_ticks(&self) -> u64 {
        (self.duration_s / self.poll_interval_s).round() as u64
    }

    pub fn fuzzer_config(&self) -> FuzzerConfig {
        FuzzerConfig { cmplog: self.cmplog, deterministic: self.deterministic, ..FuzzerConfig::default() }
    }

    /// Seed inputs: every regular file in `seeds_dir` in name order, or the
    /// target's built-in corpus.
    pub fn load_seeds(&self) -> Result<Vec<Vec<u8>>, ConfigError> {
        let Some(dir) = &self.seeds_dir else {
            return Ok(targets::seeds(&self.target)?);
        };
        let io_err = |source| ConfigError::Io { path: dir.clone(), source };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        let seeds = paths
            .iter()
            .map(|p| fs::read(p).map_err(|source| ConfigError::Io { path: p.clone(), source }))
            .collect::<Result<Vec<_>, _>>()?;
        if seeds.is_empty() {
            return Err(ConfigError::Invalid(format!("no seed files in {}", dir.display())));
        }
        Ok(seeds)
    }
}
