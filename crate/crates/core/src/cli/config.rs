//! Strict JSON run configuration and its content digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::NoiseScheduleSpec;
use crate::error::{config, Error, Result};
use crate::eval::data::Dataset;
use crate::eval::experiments::{AblationConfig, NegativeTransferConfig, TradeoffConfig};
use crate::eval::MetricConfig;
use crate::net::NetworkConfig;
use crate::sampler::SamplerConfig;
use crate::schedule::{ScheduleSpec, DEFAULT_INTERVALS};
use crate::train::{FinetuneConfig, PretrainConfig};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "ASE_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Network initialization.
    #[serde(default)]
    pub init: u64,
    /// Training batches, noise and steps.
    #[serde(default)]
    pub train: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub schedules: Vec<ScheduleSpec>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Also score each schedule's samples against a fresh reference draw.
    #[serde(default)]
    pub with_quality: bool,
}

fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpecs {
    #[serde(default)]
    pub tradeoff: Option<TradeoffConfig>,
    #[serde(default)]
    pub negative_transfer: Option<NegativeTransferConfig>,
    #[serde(default)]
    pub ablation: Option<AblationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub network: NetworkConfig,
    #[serde(default)]
    pub noise: NoiseScheduleSpec,
    /// Exit schedule used by `finetune`, `sample` and `bench` when no flag overrides it.
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
    #[serde(default)]
    pub pretrain: Option<PretrainConfig>,
    #[serde(default)]
    pub finetune: Option<FinetuneConfig>,
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    #[serde(default)]
    pub metrics: MetricConfig,
    #[serde(default)]
    pub bench: Option<BenchSpec>,
    #[serde(default)]
    pub experiments: ExperimentSpecs,
    #[serde(default)]
    pub seeds: Seeds,
    /// Not part of the digest.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_intervals() -> usize {
    DEFAULT_INTERVALS
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; a missing file is an I/O error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.network.validate()?;
        let ns = self.noise.build()?;
        if self.network.in_dim != self.dataset.dim() {
            return config(format!(
                "network.in_dim = {} but dataset `{}` has dimension {}",
                self.network.in_dim,
                self.dataset.name(),
                self.dataset.dim()
            ));
        }
        if self.network.diffusion_steps != ns.steps() {
            return config("network.diffusion_steps must equal noise.steps");
        }
        if self.intervals == 0 {
            return config("intervals must be >= 1");
        }
        self.metrics.validate()?;
        if let Some(p) = &self.pretrain {
            p.validate()?;
        }
        if let Some(f) = &self.finetune {
            f.validate()?;
        }
        if let Some(s) = &self.sampler {
            s.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialization, `output_dir` excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// `ASE_OUT_DIR`, else `output_dir`, else `runs`.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(v) = std::env::var_os(OUT_DIR_ENV) {
            return PathBuf::from(v);
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}
