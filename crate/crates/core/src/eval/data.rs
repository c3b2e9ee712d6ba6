//! Toy data distributions.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dataset {
    /// Isotropic `N(mean, std²·I)`.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Equal-weight 2-D mixture of `components` Gaussians evenly spaced on a circle.
    GmmRing {
        #[serde(default = "ring_components")]
        components: usize,
        #[serde(default = "ring_radius")]
        radius: f64,
        #[serde(default = "ring_std")]
        std: f64,
    },
    /// Uniform on the dark squares of a `cells × cells` board covering `[−half, half]²`.
    Checkerboard {
        #[serde(default = "board_cells")]
        cells: usize,
        #[serde(default = "board_half")]
        half: f64,
    },
    /// Equal-weight mixture of `blobs` Gaussians in `dim` dimensions, centers
    /// drawn uniformly in `[−spread, spread]^dim` from `center_seed`.
    TinyBlobs {
        dim: usize,
        blobs: usize,
        #[serde(default = "blob_spread")]
        spread: f64,
        #[serde(default = "ring_std")]
        std: f64,
        #[serde(default)]
        center_seed: u64,
    },
}

fn ring_components() -> usize {
    8
}
fn ring_radius() -> f64 {
    1.0
}
fn ring_std() -> f64 {
    0.1
}
fn board_cells() -> usize {
    4
}
fn board_half() -> f64 {
    2.0
}
fn blob_spread() -> f64 {
    1.5
}

impl Dataset {
    pub fn gmm_ring() -> Self {
        Dataset::GmmRing { components: ring_components(), radius: ring_radius(), std: ring_std() }
    }

    pub fn gaussian(mean: Vec<f64>, std: f64) -> Self {
        Dataset::Gaussian { mean, std }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Gaussian { .. } => "gaussian",
            Dataset::GmmRing { .. } => "gmm_ring",
            Dataset::Checkerboard { .. } => "checkerboard",
            Dataset::TinyBlobs { .. } => "tiny_blobs",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Dataset::Gaussian { mean, std } => !mean.is_empty() && *std > 0.0,
            Dataset::GmmRing { components, radius, std } => *components >= 1 && *radius >= 0.0 && *std > 0.0,
            Dataset::Checkerboard { cells, half } => *cells >= 2 && *half > 0.0,
            Dataset::TinyBlobs { dim, blobs, spread, std, .. } => *dim >= 1 && *blobs >= 1 && *spread >= 0.0 && *std > 0.0,
        };
        if !ok {
            return config(format!("invalid {} dataset parameters", self.name()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Dataset::Gaussian { mean, .. } => mean.len(),
            Dataset::GmmRing { .. } | Dataset::Checkerboard { .. } => 2,
            Dataset::TinyBlobs { dim, .. } => *dim,
        }
    }

    /// `(mean, std)` when the distribution is a single isotropic Gaussian.
    pub fn gaussian_params(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            Dataset::Gaussian { mean, std } => Some((mean.clone(), *std)),
            _ => None,
        }
    }

    /// Mixture component means, each with equal weight.
    pub fn component_means(&self) -> Vec<Vec<f64>> {
        match self {
            Dataset::Gaussian { mean, .. } => vec![mean.clone()],
            Dataset::GmmRing { components, radius, .. } => (0..*components)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / *components as f64;
                    vec![radius * a.cos(), radius * a.sin()]
                })
                .collect(),
            Dataset::Checkerboard { .. } => Vec::new(),
            Dataset::TinyBlobs { dim, blobs, spread, center_seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*center_seed);
                (0..*blobs).map(|_| (0..*dim).map(|_| rng.gen_range(-*spread..=*spread)).collect()).collect()
            }
        }
    }

    /// `n` independent draws from a fresh stream seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let centers = self.component_means();
        for mut row in out.outer_iter_mut() {
            match self {
                Dataset::Gaussian { mean, std } => {
                    for (x, m) in row.iter_mut().zip(mean) {
                        let z: f64 = StandardNormal.sample(rng);
                        *x = m + std * z;
                    }
                }
                Dataset::GmmRing { std, .. } | Dataset::TinyBlobs { std, .. } => {
                    let c = &centers[rng.gen_range(0..centers.len())];
                    for (x, m) in row.iter_mut().zip(c) {
                        let z: f64 = StandardNormal.sample(rng);
                        *x = m + std * z;
                    }
                }
                Dataset::Checkerboard { cells, half } => {
                    let side = 2.0 * half / *cells as f64;
                    // pick a dark cell uniformly, then a uniform point inside it
                    let dark = cells * cells / 2 + (cells * cells % 2);
                    let k = rng.gen_range(0..dark);
                    let (mut i, mut j) = (0, 0);
                    let mut seen = 0;
                    'outer: for a in 0..*cells {
                        for b in 0..*cells {
                            if (a + b) % 2 == 0 {
                                if seen == k {
                                    (i, j) = (a, b);
                                    break 'outer;
                                }
                                seen += 1;
                            }
                        }
                    }
                    row[0] = -half + side * (i as f64 + rng.gen::<f64>());
                    row[1] = -half + side * (j as f64 + rng.gen::<f64>());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        for ds in [
            Dataset::gaussian(vec![1.0], 0.5),
            Dataset::gmm_ring(),
            Dataset::Checkerboard { cells: 4, half: 2.0 },
            Dataset::TinyBlobs { dim: 3, blobs: 4, spread: 1.5, std: 0.1, center_seed: 2 },
        ] {
            ds.validate().unwrap();
            let a = ds.sample(64, 9);
            assert_eq!(a.dim(), (64, ds.dim()));
            assert_eq!(a, ds.sample(64, 9));
            assert_ne!(a, ds.sample(64, 10));
        }
    }

    #[test]
    fn ring_points_near_circle() {
        let x = Dataset::gmm_ring().sample(2000, 1);
        let mean_r = x.outer_iter().map(|r| (r[0] * r[0] + r[1] * r[1]).sqrt()).sum::<f64>() / 2000.0;
        assert!((mean_r - 1.0).abs() < 0.02, "{mean_r}");
    }

    #[test]
    fn checkerboard_on_dark_cells() {
        let x = Dataset::Checkerboard { cells: 4, half: 2.0 }.sample(1000, 3);
        for r in x.outer_iter() {
            let (i, j) = (((r[0] + 2.0) / 1.0).floor() as i64, ((r[1] + 2.0) / 1.0).floor() as i64);
            assert_eq!((i + j) % 2, 0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Dataset::gaussian(vec![], 1.0).validate().is_err());
        assert!(Dataset::GmmRing { components: 0, radius: 1.0, std: 0.1 }.validate().is_err());
    }
}
