//! Closed-form diffusion mathematics.
//!
//! Steps are discrete, `t ∈ {1..T}`, with the convention `ᾱ_0 = 1`. The
//! continuous time `u = t/T` runs from data (`u → 0`) to noise (`u = 1`).
//! Everything here is a pure function of its inputs; no function draws
//! random numbers, callers pass the noise in.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Error, Result};

/// Which variance the ancestral sampler injects at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    /// `σ_t² = β̃_t`, the posterior variance.
    #[default]
    PosteriorVariance,
    /// `σ_t² = β_t`.
    Beta,
}

/// Serializable description of a linear noise schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseScheduleSpec {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    #[serde(default)]
    pub sigma: SigmaKind,
}

fn default_steps() -> usize {
    1000
}
fn default_beta_start() -> f64 {
    1e-4
}
fn default_beta_end() -> f64 {
    0.02
}

impl Default for NoiseScheduleSpec {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            beta_start: default_beta_start(),
            beta_end: default_beta_end(),
            sigma: SigmaKind::default(),
        }
    }
}

impl NoiseScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule> {
        let mut ns = linear_beta_schedule(self.steps, self.beta_start, self.beta_end)?;
        ns.sigma_kind = self.sigma;
        Ok(ns)
    }
}

/// Precomputed `β_t, α_t, ᾱ_t, β̃_t` tables for `t = 1..=T`, all in 64-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    spec: NoiseScheduleSpec,
    sigma_kind: SigmaKind,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    // index 0 holds the ᾱ_0 = 1 convention
    alpha_bar: Vec<f64>,
    beta_tilde: Vec<f64>,
}

/// Linearly spaced `β` from `beta_start` to `beta_end` inclusive.
pub fn linear_beta_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return config("noise schedule needs at least one step");
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return config(format!(
            "betas must satisfy 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        ));
    }
    let beta: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        let span = beta_end - beta_start;
        (0..steps)
            .map(|i| {
                if i + 1 == steps {
                    beta_end
                } else {
                    beta_start + span * i as f64 / (steps - 1) as f64
                }
            })
            .collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(steps + 1);
    alpha_bar.push(1.0);
    for a in &alpha {
        let prev = *alpha_bar.last().unwrap();
        alpha_bar.push(prev * a);
    }
    let beta_tilde = (0..steps)
        .map(|i| (1.0 - alpha_bar[i]) / (1.0 - alpha_bar[i + 1]) * beta[i])
        .collect();
    Ok(NoiseSchedule {
        spec: NoiseScheduleSpec { steps, beta_start, beta_end, sigma: SigmaKind::default() },
        sigma_kind: SigmaKind::default(),
        beta,
        alpha,
        alpha_bar,
        beta_tilde,
    })
}

impl NoiseSchedule {
    /// The default `T = 1000`, `β ∈ [1e-4, 0.02]` schedule.
    pub fn standard() -> Self {
        NoiseScheduleSpec::default().build().expect("default schedule is valid")
    }

    pub fn with_sigma(mut self, kind: SigmaKind) -> Self {
        self.sigma_kind = kind;
        self
    }

    pub fn spec(&self) -> NoiseScheduleSpec {
        NoiseScheduleSpec { sigma: self.sigma_kind, ..self.spec }
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return contract(format!("step {t} outside 1..={}", self.steps()));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// `ᾱ_t`, defined for `t = 0..=T` with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn beta_tilde(&self, t: usize) -> f64 {
        self.beta_tilde[t - 1]
    }

    /// Ancestral-sampler standard deviation; `σ_1` is always zero.
    pub fn sigma(&self, t: usize) -> f64 {
        if t <= 1 {
            return 0.0;
        }
        match self.sigma_kind {
            SigmaKind::PosteriorVariance => self.beta_tilde(t).sqrt(),
            SigmaKind::Beta => self.beta(t).sqrt(),
        }
    }

    /// Continuous-time `β(u)` for the variance-preserving SDE: the discrete table
    /// linearly interpolated at `u·T` and rescaled by `T`.
    pub fn continuous_beta(&self, u: f64) -> f64 {
        let steps = self.steps();
        let pos = (u * steps as f64).clamp(1.0, steps as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(steps);
        let frac = pos - lo as f64;
        let b = self.beta(lo) * (1.0 - frac) + self.beta(hi) * frac;
        b * steps as f64
    }
}

fn same_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return contract(format!("{what}: length {} vs {}", a.len(), b.len()));
    }
    Ok(())
}

/// `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`.
pub fn perturb(x0: &[f64], t: usize, eps: &[f64], ns: &NoiseSchedule) -> Result<Vec<f64>> {
    ns.check_step(t)?;
    same_len(x0, eps, "perturb")?;
    let ab = ns.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// Batched [`perturb`] over rows; `t` holds one step per row.
pub fn perturb_batch(
    x0: ArrayView2<f64>,
    t: &[usize],
    eps: ArrayView2<f64>,
    ns: &NoiseSchedule,
) -> Result<Array2<f64>> {
    if x0.dim() != eps.dim() || t.len() != x0.nrows() {
        return contract("perturb_batch: inconsistent shapes");
    }
    let mut out = Array2::zeros(x0.dim());
    for (i, &ti) in t.iter().enumerate() {
        ns.check_step(ti)?;
        let ab = ns.alpha_bar(ti);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for j in 0..x0.ncols() {
            out[[i, j]] = a * x0[[i, j]] + b * eps[[i, j]];
        }
    }
    Ok(out)
}

fn noise_scale(t: usize, ns: &NoiseSchedule) -> Result<f64> {
    if t > ns.steps() {
        return contract(format!("step {t} outside 0..={}", ns.steps()));
    }
    let v = 1.0 - ns.alpha_bar(t);
    if v <= 0.0 {
        return Err(Error::DivisionGuard(format!("1 - alpha_bar({t}) = {v}")));
    }
    Ok(v.sqrt())
}

/// `s = −ε/√(1−ᾱ_t)`.
pub fn eps_to_score(eps: &[f64], t: usize, ns: &NoiseSchedule) -> Result<Vec<f64>> {
    let s = noise_scale(t, ns)?;
    Ok(eps.iter().map(|e| -e / s).collect())
}

/// Inverse of [`eps_to_score`]: `ε = −s·√(1−ᾱ_t)`.
pub fn score_to_eps(score: &[f64], t: usize, ns: &NoiseSchedule) -> Result<Vec<f64>> {
    let s = noise_scale(t, ns)?;
    Ok(score.iter().map(|v| -v * s).collect())
}

/// Noise implied by `(x_t, x0)`, i.e. `perturb` solved for `ε`.
pub fn recover_eps(x_t: &[f64], x0: &[f64], t: usize, ns: &NoiseSchedule) -> Result<Vec<f64>> {
    ns.check_step(t)?;
    same_len(x_t, x0, "recover_eps")?;
    let ab = ns.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x_t.iter().zip(x0).map(|(x, z)| (x - a * z) / b).collect())
}

/// `μ_θ = (x_t − β_t/√(1−ᾱ_t)·ε̂)/√α_t`.
pub fn mu_theta(x_t: &[f64], eps_hat: &[f64], t: usize, ns: &NoiseSchedule) -> Result<Vec<f64>> {
    ns.check_step(t)?;
    same_len(x_t, eps_hat, "mu_theta")?;
    let coef = ns.beta(t) / (1.0 - ns.alpha_bar(t)).sqrt();
    let inv = 1.0 / ns.alpha(t).sqrt();
    Ok(x_t.iter().zip(eps_hat).map(|(x, e)| inv * (x - coef * e)).collect())
}

/// Mean and variance of `q(x_{t−1} | x_t, x0)`.
///
/// At `t = 1` the posterior collapses onto `x0`, so `(x0, 0)` is returned
/// directly instead of going through the inverted noise.
pub fn posterior_q(x_t: &[f64], x0: &[f64], t: usize, ns: &NoiseSchedule) -> Result<(Vec<f64>, f64)> {
    ns.check_step(t)?;
    same_len(x_t, x0, "posterior_q")?;
    if t == 1 {
        return Ok((x0.to_vec(), 0.0));
    }
    let eps = recover_eps(x_t, x0, t, ns)?;
    Ok((mu_theta(x_t, &eps, t, ns)?, ns.beta_tilde(t)))
}

/// Map from step to the loss weight `λ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaFn {
    /// `λ ≡ 1`.
    Uniform,
    /// `factor` on `u = t/T > region_start`, 1 elsewhere.
    Boost { factor: f64, region_start: f64 },
    /// Explicit per-step table, index `t − 1`.
    Table(Vec<f64>),
}

impl LambdaFn {
    pub fn weight(&self, t: usize, steps: usize) -> f64 {
        match self {
            LambdaFn::Uniform => 1.0,
            LambdaFn::Boost { factor, region_start } => {
                if t as f64 / steps as f64 > *region_start {
                    *factor
                } else {
                    1.0
                }
            }
            LambdaFn::Table(w) => w[t - 1],
        }
    }

    fn validate(&self, steps: usize) -> Result<()> {
        match self {
            LambdaFn::Uniform => Ok(()),
            LambdaFn::Boost { factor, region_start } => {
                if !(*factor > 0.0) || !(0.0..1.0).contains(region_start) {
                    return config(format!("invalid boost λ: factor {factor}, region {region_start}"));
                }
                Ok(())
            }
            LambdaFn::Table(w) => {
                if w.len() != steps || w.iter().any(|v| !(*v > 0.0)) {
                    return config("λ table must hold T positive weights");
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub lambda: LambdaFn,
    pub vlb_weight: f64,
    pub learned_variance: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: LambdaFn::Uniform, vlb_weight: 0.0, learned_variance: false }
    }
}

impl LossConfig {
    pub fn validate(&self, steps: usize) -> Result<()> {
        self.lambda.validate(steps)?;
        if !(self.vlb_weight >= 0.0) {
            return config(format!("vlb_weight must be >= 0, got {}", self.vlb_weight));
        }
        Ok(())
    }
}

/// A batch of `(x0, t, ε)` triples, one per row.
#[derive(Debug, Clone)]
pub struct LossBatch {
    pub x0: Array2<f64>,
    pub t: Vec<usize>,
    pub eps: Array2<f64>,
}

/// Squared error between the injected and predicted noise of one example.
pub fn squared_error(eps: &[f64], eps_hat: &[f64]) -> f64 {
    eps.iter().zip(eps_hat).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Mean over the batch of `λ(t)·‖ε − ε̂‖²`.
///
/// `predict` receives the perturbed inputs and their steps and returns `ε̂`.
pub fn loss_simple<F>(batch: &LossBatch, mut predict: F, ns: &NoiseSchedule, cfg: &LossConfig) -> Result<f64>
where
    F: FnMut(ArrayView2<f64>, &[usize]) -> Array2<f64>,
{
    let n = batch.t.len();
    if n == 0 {
        return contract("empty loss batch");
    }
    cfg.validate(ns.steps())?;
    let x_t = perturb_batch(batch.x0.view(), &batch.t, batch.eps.view(), ns)?;
    let eps_hat = predict(x_t.view(), &batch.t);
    if eps_hat.dim() != batch.eps.dim() {
        return contract("predictor output shape differs from ε");
    }
    let mut total = 0.0;
    for (i, &t) in batch.t.iter().enumerate() {
        let e = batch.eps.row(i);
        let h = eps_hat.row(i);
        let se: f64 = e.iter().zip(h.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        total += cfg.lambda.weight(t, ns.steps()) * se;
    }
    Ok(total / n as f64)
}

/// Log-variance of the learned-variance model, `v·log β_t + (1−v)·log β̃_t`.
pub fn model_log_variance(v: f64, t: usize, ns: &NoiseSchedule) -> f64 {
    v * ns.beta(t).ln() + (1.0 - v) * ns.beta_tilde(t).ln()
}

/// `KL[q(x_{t−1}|x_t,x0) ‖ p_θ(x_{t−1}|x_t)]` in nats, summed over dimensions.
///
/// The `t = 1` term is excluded from the hybrid objective and returns 0.
pub fn kl_vlb_term(
    x0: &[f64],
    x_t: &[f64],
    t: usize,
    eps_hat: &[f64],
    v: &[f64],
    ns: &NoiseSchedule,
) -> Result<f64> {
    ns.check_step(t)?;
    same_len(x0, v, "kl_vlb_term")?;
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return contract("variance interpolation must lie in [0, 1]");
    }
    if t == 1 {
        return Ok(0.0);
    }
    let (mu_q, var_q) = posterior_q(x_t, x0, t, ns)?;
    let mu_p = mu_theta(x_t, eps_hat, t, ns)?;
    let log_var_q = var_q.ln();
    Ok(mu_q
        .iter()
        .zip(&mu_p)
        .zip(v)
        .map(|((mq, mp), &vi)| {
            let log_var_p = model_log_variance(vi, t, ns);
            gaussian_kl(*mq, var_q, log_var_q, *mp, log_var_p)
        })
        .sum())
}

/// Scalar `KL[N(m_q, var_q) ‖ N(m_p, exp(log_var_p))]`.
pub fn gaussian_kl(m_q: f64, var_q: f64, log_var_q: f64, m_p: f64, log_var_p: f64) -> f64 {
    0.5 * (log_var_p - log_var_q + (var_q + (m_q - m_p).powi(2)) * (-log_var_p).exp() - 1.0)
}

/// Derivative of [`gaussian_kl`] with respect to `log_var_p`.
pub(crate) fn gaussian_kl_dlogvar(m_q: f64, var_q: f64, m_p: f64, log_var_p: f64) -> f64 {
    0.5 * (1.0 - (var_q + (m_q - m_p).powi(2)) * (-log_var_p).exp())
}

/// Optimal `ε` regressor when the data is `N(mean, std²·I)`:
/// `ε* = √(1−ᾱ_t)·(x_t − √ᾱ_t·m)/(ᾱ_t·s² + 1 − ᾱ_t)`.
pub fn gaussian_oracle_eps(
    x_t: &[f64],
    t: usize,
    data_mean: &[f64],
    data_std: f64,
    ns: &NoiseSchedule,
) -> Result<Vec<f64>> {
    ns.check_step(t)?;
    same_len(x_t, data_mean, "gaussian_oracle_eps")?;
    let ab = ns.alpha_bar(t);
    let denom = ab * data_std * data_std + 1.0 - ab;
    let (ra, rb) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x_t.iter().zip(data_mean).map(|(x, m)| rb * (x - ra * m) / denom).collect())
}
