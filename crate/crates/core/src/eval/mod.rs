//! Toy datasets, quality metrics, the acceleration benchmark and experiment suites.

pub mod bench;
pub mod data;
pub mod experiments;
pub mod metrics;
pub mod report;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use data::Dataset;

/// How generated samples are scored against the data distribution.
///
/// The reference set is a fresh draw of `n_samples` points from the dataset
/// under `reference_seed`, not a fixed training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_n_proj")]
    pub n_proj: usize,
    #[serde(default)]
    pub projection_seed: u64,
    #[serde(default = "default_reference_seed")]
    pub reference_seed: u64,
}

fn default_n_samples() -> usize {
    8192
}
fn default_n_proj() -> usize {
    256
}
fn default_reference_seed() -> u64 {
    0x5eed
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            n_samples: default_n_samples(),
            n_proj: default_n_proj(),
            projection_seed: 0,
            reference_seed: default_reference_seed(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.n_proj == 0 {
            return config("metrics need n_samples >= 2 and n_proj >= 1");
        }
        Ok(())
    }

    pub fn reference(&self, data: &Dataset) -> ndarray::Array2<f64> {
        data.sample(self.n_samples, self.reference_seed)
    }
}

/// Quality of one sample set against a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub sliced_wasserstein: f64,
    pub gaussian_frechet: f64,
    pub frechet_ridge: bool,
}

pub fn quality(samples: ArrayView2<f64>, reference: ArrayView2<f64>, mc: &MetricConfig) -> Result<Quality> {
    let sliced_wasserstein = metrics::sliced_wasserstein(samples, reference, mc.n_proj, mc.projection_seed)?;
    let f = metrics::gaussian_frechet(samples, reference)?;
    Ok(Quality { sliced_wasserstein, gaussian_frechet: f.distance, frechet_ridge: f.ridge })
}
