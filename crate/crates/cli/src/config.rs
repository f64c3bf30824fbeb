use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracecorpus::dataset::{SplitRatios, DEFAULT_HARD_FRACTION};
use tracecorpus::harness::{HarnessConfig, Limits};
use tracecorpus::mutation::DEFAULT_MUTANTS_PER_SEED;

use crate::error::{CliError, Result};

/// Settings shared by every pipeline; loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub rng_seed: u64,
    pub mutants_per_seed: usize,
    pub limits: Limits,
    pub split: SplitRatios,
    pub stage: String,
    pub hard_fraction: f64,
    pub python: String,
    pub hook: Option<PathBuf>,
    /// 0 means one worker per available core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rng_seed: 0,
            mutants_per_seed: DEFAULT_MUTANTS_PER_SEED,
            limits: Limits::default(),
            split: SplitRatios::default(),
            stage: "S3".into(),
            hard_fraction: DEFAULT_HARD_FRACTION,
            python: "python3".into(),
            hook: None,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }
    }

    pub fn harness_config(&self) -> Result<HarnessConfig> {
        let hook = self
            .hook
            .clone()
            .ok_or_else(|| CliError::usage("a trace hook is required (--hook or `hook` in the config)"))?;
        Ok(HarnessConfig { python: self.python.clone(), hook, limits: self.limits })
    }
}
