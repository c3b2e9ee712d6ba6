//! What a sampler needs from a noise predictor.

use ndarray::{Array2, ArrayView2};

use crate::diffusion::{gaussian_oracle_eps, NoiseSchedule};
use crate::error::{config, contract, Result};
use crate::net::{Architecture, ScoreNetwork};

/// A batched `ε̂(x, t)` predictor, optionally truncated to `blocks` retained blocks.
pub trait EpsModel {
    fn in_dim(&self) -> usize;

    /// Block layout exit schedules must be bound to; `None` for models
    /// without blocks.
    fn architecture(&self) -> Option<Architecture>;

    /// `blocks = None` runs the full model.
    fn predict(&self, x: ArrayView2<f64>, t: usize, blocks: Option<usize>) -> Result<Array2<f64>>;

    /// Multiply-accumulate count of one single-example evaluation.
    fn flops(&self, t: usize, blocks: Option<usize>) -> Result<u64>;
}

impl EpsModel for ScoreNetwork {
    fn in_dim(&self) -> usize {
        self.config().in_dim
    }

    fn architecture(&self) -> Option<Architecture> {
        Some(ScoreNetwork::architecture(self))
    }

    fn predict(&self, x: ArrayView2<f64>, t: usize, blocks: Option<usize>) -> Result<Array2<f64>> {
        let ts = vec![t; x.nrows()];
        let out = match blocks {
            None => self.forward_full(x, &ts)?,
            Some(s) => self.forward_early_exit(x, &ts, s)?,
        };
        Ok(out.eps)
    }

    fn flops(&self, _t: usize, blocks: Option<usize>) -> Result<u64> {
        self.flop_count(blocks.unwrap_or_else(|| self.max_depth()))
    }
}

/// Exact `ε*` for `N(mean, std²·I)` data, usable wherever a network is.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    pub mean: Vec<f64>,
    pub std: f64,
    pub schedule: NoiseSchedule,
}

impl GaussianOracle {
    pub fn new(mean: Vec<f64>, std: f64, schedule: NoiseSchedule) -> Result<Self> {
        if mean.is_empty() || !(std >= 0.0) {
            return config("oracle needs a non-empty mean and std >= 0");
        }
        Ok(Self { mean, std, schedule })
    }
}

impl EpsModel for GaussianOracle {
    fn in_dim(&self) -> usize {
        self.mean.len()
    }

    fn architecture(&self) -> Option<Architecture> {
        None
    }

    fn predict(&self, x: ArrayView2<f64>, t: usize, _blocks: Option<usize>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return contract("oracle input dimension mismatch");
        }
        let mut out = Array2::zeros(x.dim());
        for (i, row) in x.outer_iter().enumerate() {
            let e = gaussian_oracle_eps(&row.to_vec(), t, &self.mean, self.std, &self.schedule)?;
            out.row_mut(i).iter_mut().zip(e).for_each(|(d, s)| *d = s);
        }
        Ok(out)
    }

    fn flops(&self, _t: usize, _blocks: Option<usize>) -> Result<u64> {
        Ok(0)
    }
}

/// One interval's model inside an [`IntervalRouter`].
#[derive(Debug, Clone, Copy)]
pub struct Route<'a> {
    pub net: &'a ScoreNetwork,
    /// Retained blocks on this interval; `None` runs the full network.
    pub blocks: Option<usize>,
}

/// Serves each of `K` time intervals with its own network and depth, as in
/// the multi-experts and mixed-k configurations.
#[derive(Debug, Clone)]
pub struct IntervalRouter<'a> {
    routes: Vec<Route<'a>>,
    steps: usize,
}

impl<'a> IntervalRouter<'a> {
    pub fn new(routes: Vec<Route<'a>>, steps: usize) -> Result<Self> {
        let Some(first) = routes.first() else {
            return config("router needs at least one interval");
        };
        let dim = first.net.config().in_dim;
        for r in &routes {
            if r.net.config().in_dim != dim {
                return config("router networks disagree on input dimension");
            }
            if let Some(b) = r.blocks {
                if b == 0 || b > r.net.max_depth() {
                    return config(format!("route depth {b} outside 1..={}", r.net.max_depth()));
                }
            }
        }
        Ok(Self { routes, steps })
    }

    fn route(&self, t: usize) -> Route<'a> {
        self.routes[crate::schedule::interval_index(t, self.steps, self.routes.len())]
    }
}

impl EpsModel for IntervalRouter<'_> {
    fn in_dim(&self) -> usize {
        self.routes[0].net.config().in_dim
    }

    fn architecture(&self) -> Option<Architecture> {
        None
    }

    fn predict(&self, x: ArrayView2<f64>, t: usize, blocks: Option<usize>) -> Result<Array2<f64>> {
        if blocks.is_some() {
            return contract("a router fixes its own depths");
        }
        let r = self.route(t);
        r.net.predict(x, t, r.blocks)
    }

    fn flops(&self, t: usize, _blocks: Option<usize>) -> Result<u64> {
        let r = self.route(t);
        r.net.flops(t, r.blocks)
    }
}
