//! Reverse-process solvers driven by an [`EpsModel`] and an optional exit schedule.
//!
//! Every chain in a batch draws from its own ChaCha stream (`seed`, stream =
//! chain index), so results never depend on batch order or size.

use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::{eps_to_score, mu_theta, NoiseSchedule};
use crate::error::{config, contract, Error, Result};
use crate::model::EpsModel;
use crate::schedule::ExitSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Ancestral sampling with `μ_θ` and `σ_t`.
    Ddpm,
    /// DDIM; `eta = 0` is the deterministic first-order exponential integrator.
    Ddim,
    /// Euler–Maruyama on the reverse-time variance-preserving SDE.
    Em,
    /// Ancestral predictor followed by Langevin corrector iterations.
    Langevin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StepGrid {
    /// `t_k = ⌈k·T/n⌉` for `k = n..1`.
    Uniform,
    /// Strictly decreasing steps within `1..=T`.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub n_steps: usize,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_langevin_step")]
    pub langevin_step: f64,
    #[serde(default = "default_langevin_iters")]
    pub langevin_iters: usize,
    #[serde(default = "default_grid")]
    pub step_grid: StepGrid,
    #[serde(default)]
    pub seed: u64,
    pub batch: usize,
}

fn default_langevin_step() -> f64 {
    1e-4
}
fn default_langevin_iters() -> usize {
    1
}
fn default_grid() -> StepGrid {
    StepGrid::Uniform
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, n_steps: usize, batch: usize, seed: u64) -> Self {
        Self {
            kind,
            n_steps,
            eta: 0.0,
            langevin_step: default_langevin_step(),
            langevin_iters: default_langevin_iters(),
            step_grid: StepGrid::Uniform,
            seed,
            batch,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.batch == 0 {
            return config("sampler needs n_steps >= 1 and batch >= 1");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return config(format!("eta must be in [0, 1], got {}", self.eta));
        }
        if !(self.langevin_step > 0.0) {
            return config("langevin_step must be > 0");
        }
        if let StepGrid::Explicit(g) = &self.step_grid {
            if g.len() != self.n_steps {
                return config("explicit step grid length must equal n_steps");
            }
        }
        Ok(())
    }

    /// Diffusion steps visited, in decreasing order.
    pub fn grid(&self, steps: usize) -> Result<Vec<usize>> {
        let g = match &self.step_grid {
            StepGrid::Uniform => {
                if self.n_steps > steps {
                    return config(format!("{} solver steps exceed T = {steps}", self.n_steps));
                }
                (1..=self.n_steps).rev().map(|k| (k * steps).div_ceil(self.n_steps)).collect()
            }
            StepGrid::Explicit(g) => g.clone(),
        };
        let ok = g.iter().all(|&t| t >= 1 && t <= steps) && g.windows(2).all(|w| w[0] > w[1]);
        if !ok {
            return config("step grid must be strictly decreasing within 1..=T");
        }
        Ok(g)
    }
}

/// `x_{t−1} = μ_θ(x_t, ε̂) + σ_t·z`; `σ_1 = 0`.
pub fn ddpm_step(x_t: &[f64], t: usize, eps_hat: &[f64], ns: &NoiseSchedule, z: &[f64]) -> Result<Vec<f64>> {
    let mut x = mu_theta(x_t, eps_hat, t, ns)?;
    let sigma = ns.sigma(t);
    if sigma > 0.0 {
        if z.len() != x.len() {
            return contract("ddpm_step: noise length mismatch");
        }
        x.iter_mut().zip(z).for_each(|(a, b)| *a += sigma * b);
    }
    Ok(x)
}

/// DDIM noise level between `t` and `t_next`:
/// `η·√((1−ᾱ_{t′})/(1−ᾱ_t))·√(1−ᾱ_t/ᾱ_{t′})`.
pub fn ddim_sigma(t: usize, t_next: usize, eta: f64, ns: &NoiseSchedule) -> f64 {
    let (a, an) = (ns.alpha_bar(t), ns.alpha_bar(t_next));
    eta * ((1.0 - an) / (1.0 - a)).sqrt() * (1.0 - a / an).sqrt()
}

/// Result of one DDIM update.
#[derive(Debug, Clone, PartialEq)]
pub struct DdimUpdate {
    pub x: Vec<f64>,
    pub x0_hat: Vec<f64>,
    /// The direction coefficient `1 − ᾱ_{t′} − σ²` was negative and clamped to 0.
    pub clamped: bool,
}

/// `x_{t′} = √ᾱ_{t′}·x̂0 + √(1−ᾱ_{t′}−σ²)·ε̂ + σ·z`, `x̂0 = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t`.
pub fn ddim_step(
    x_t: &[f64],
    t: usize,
    t_next: usize,
    eps_hat: &[f64],
    ns: &NoiseSchedule,
    eta: f64,
    z: &[f64],
) -> Result<DdimUpdate> {
    ns.check_step(t)?;
    if t_next >= t {
        return contract(format!("ddim_step needs t_next < t, got {t_next} >= {t}"));
    }
    if x_t.len() != eps_hat.len() {
        return contract("ddim_step: shape mismatch");
    }
    let (a, an) = (ns.alpha_bar(t), ns.alpha_bar(t_next));
    let sigma = ddim_sigma(t, t_next, eta, ns);
    let mut dir = 1.0 - an - sigma * sigma;
    let clamped = dir < 0.0;
    if clamped {
        dir = 0.0;
    }
    let (ra, rb) = (a.sqrt(), (1.0 - a).sqrt());
    let x0_hat: Vec<f64> = x_t.iter().zip(eps_hat).map(|(x, e)| (x - rb * e) / ra).collect();
    let (ran, rd) = (an.sqrt(), dir.sqrt());
    let mut x: Vec<f64> = x0_hat.iter().zip(eps_hat).map(|(x0, e)| ran * x0 + rd * e).collect();
    if sigma > 0.0 {
        if z.len() != x.len() {
            return contract("ddim_step: noise length mismatch");
        }
        x.iter_mut().zip(z).for_each(|(a, b)| *a += sigma * b);
    }
    Ok(DdimUpdate { x, x0_hat, clamped })
}

/// Reverse-SDE Euler–Maruyama step from continuous time `u` to `u − dt`:
/// `x′ = x + (½β(u)·x + β(u)·ŝ)·dt + √(β(u)·dt)·z`.
pub fn em_step(x: &[f64], u: f64, score: &[f64], ns: &NoiseSchedule, dt: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return contract("em_step needs dt > 0");
    }
    em_step_with_beta(x, ns.continuous_beta(u), score, dt, z)
}

/// [`em_step`] with an explicit `β` value.
pub fn em_step_with_beta(x: &[f64], beta: f64, score: &[f64], dt: f64, z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != score.len() || x.len() != z.len() {
        return contract("em_step: shape mismatch");
    }
    let noise = (beta * dt).sqrt();
    Ok(x.iter()
        .zip(score)
        .zip(z)
        .map(|((xi, si), zi)| xi + (0.5 * beta * xi + beta * si) * dt + noise * zi)
        .collect())
}

/// `x′ = x + β·ŝ + √(2β)·z`.
pub fn langevin_step(x: &[f64], score: &[f64], beta_step: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(beta_step > 0.0) {
        return contract("langevin step size must be > 0");
    }
    if x.len() != score.len() || x.len() != z.len() {
        return contract("langevin_step: shape mismatch");
    }
    let k = (2.0 * beta_step).sqrt();
    Ok(x.iter().zip(score).zip(z).map(|((a, s), n)| a + beta_step * s + k * n).collect())
}

/// Per-run cost accounting. FLOPs are per single example.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub total_time_s: f64,
    pub total_flops: u64,
    pub per_step_t: Vec<usize>,
    pub per_step_blocks: Vec<Option<usize>>,
    pub per_step_time_s: Vec<f64>,
    pub per_step_flops: Vec<u64>,
    /// DDIM updates whose direction coefficient had to be clamped.
    pub clamped_steps: usize,
}

impl RunStats {
    pub fn evaluations(&self) -> usize {
        self.per_step_t.len()
    }

    /// Median network time per evaluation.
    pub fn median_step_time_s(&self) -> f64 {
        median(&self.per_step_time_s)
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct Chains {
    rngs: Vec<ChaCha8Rng>,
    dim: usize,
}

impl Chains {
    fn new(seed: u64, batch: usize, dim: usize) -> Self {
        let rngs = (0..batch)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(i as u64);
                r
            })
            .collect();
        Self { rngs, dim }
    }

    fn normal(&mut self, i: usize) -> Vec<f64> {
        let r = &mut self.rngs[i];
        (0..self.dim).map(|_| StandardNormal.sample(r)).collect()
    }
}

struct Evaluator<'a> {
    model: &'a dyn EpsModel,
    exit: Option<&'a ExitSchedule>,
    steps: usize,
    stats: RunStats,
}

impl Evaluator<'_> {
    fn eval(&mut self, x: &Array2<f64>, t: usize) -> Result<Array2<f64>> {
        let blocks = self.exit.map(|s| s.lookup_blocks(t, self.steps));
        let start = Instant::now();
        let eps = self.model.predict(x.view(), t, blocks)?;
        let dt = start.elapsed().as_secs_f64();
        let flops = self.model.flops(t, blocks)?;
        self.stats.per_step_t.push(t);
        self.stats.per_step_blocks.push(blocks);
        self.stats.per_step_time_s.push(dt);
        self.stats.per_step_flops.push(flops);
        self.stats.total_time_s += dt;
        self.stats.total_flops += flops;
        Ok(eps)
    }
}

/// Runs the configured solver from `x_T ~ N(0, I)` and returns terminal
/// samples with cost statistics. At each evaluation the retained-block count
/// is `S(t)` from `exit`, or the full model when `exit` is `None`.
pub fn sample_loop(
    model: &dyn EpsModel,
    exit: Option<&ExitSchedule>,
    cfg: &SamplerConfig,
    ns: &NoiseSchedule,
) -> Result<(Array2<f64>, RunStats)> {
    cfg.validate()?;
    if let Some(s) = exit {
        match model.architecture() {
            Some(arch) => s.check_bound(arch)?,
            None => return Err(Error::Architecture(format!("schedule `{}` given for a model without blocks", s.name))),
        }
    }
    let steps = ns.steps();
    let grid = cfg.grid(steps)?;
    let dim = model.in_dim();
    let mut chains = Chains::new(cfg.seed, cfg.batch, dim);
    let mut x = Array2::zeros((cfg.batch, dim));
    for i in 0..cfg.batch {
        let z = chains.normal(i);
        x.row_mut(i).iter_mut().zip(z).for_each(|(d, s)| *d = s);
    }
    let mut ev = Evaluator { model, exit, steps, stats: RunStats::default() };

    match cfg.kind {
        SamplerKind::Ddpm | SamplerKind::Ddim | SamplerKind::Langevin => {
            let eta = if cfg.kind == SamplerKind::Ddim { cfg.eta } else { 1.0 };
            for (k, &t) in grid.iter().enumerate() {
                let t_next = grid.get(k + 1).copied().unwrap_or(0);
                let eps = ev.eval(&x, t)?;
                for i in 0..cfg.batch {
                    let xi = x.row(i).to_vec();
                    let ei = eps.row(i).to_vec();
                    let next = if cfg.kind != SamplerKind::Ddim && t_next + 1 == t {
                        let z = if ns.sigma(t) > 0.0 { chains.normal(i) } else { Vec::new() };
                        ddpm_step(&xi, t, &ei, ns, &z)?
                    } else {
                        let z = if ddim_sigma(t, t_next, eta, ns) > 0.0 { chains.normal(i) } else { Vec::new() };
                        let upd = ddim_step(&xi, t, t_next, &ei, ns, eta, &z)?;
                        ev.stats.clamped_steps += upd.clamped as usize;
                        upd.x
                    };
                    x.row_mut(i).iter_mut().zip(next).for_each(|(d, s)| *d = s);
                }
                if cfg.kind == SamplerKind::Langevin && t_next >= 1 {
                    for _ in 0..cfg.langevin_iters {
                        let eps = ev.eval(&x, t_next)?;
                        for i in 0..cfg.batch {
                            let s = eps_to_score(&eps.row(i).to_vec(), t_next, ns)?;
                            let z = chains.normal(i);
                            let next = langevin_step(&x.row(i).to_vec(), &s, cfg.langevin_step, &z)?;
                            x.row_mut(i).iter_mut().zip(next).for_each(|(d, s)| *d = s);
                        }
                    }
                }
            }
        }
        SamplerKind::Em => {
            let n = grid.len();
            for (k, &t) in grid.iter().enumerate() {
                let t_next = grid.get(k + 1).copied().unwrap_or(0);
                let u = t as f64 / steps as f64;
                let dt = (t - t_next) as f64 / steps as f64;
                let beta = ns.continuous_beta(u);
                let eps = ev.eval(&x, t)?;
                for i in 0..cfg.batch {
                    let s = eps_to_score(&eps.row(i).to_vec(), t, ns)?;
                    let z = chains.normal(i);
                    let next = em_step_with_beta(&x.row(i).to_vec(), beta, &s, dt, &z)?;
                    x.row_mut(i).iter_mut().zip(next).for_each(|(d, s)| *d = s);
                }
                debug_assert!(k < n);
            }
        }
    }
    Ok((x, ev.stats))
}
