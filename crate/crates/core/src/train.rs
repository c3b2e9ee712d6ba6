//! Pretraining and early-exit fine-tuning with an EMA teacher.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::{gaussian_kl, gaussian_kl_dlogvar, mu_theta, perturb_batch, posterior_q, NoiseSchedule};
use crate::error::{config, contract, Error, Result};
use crate::eval::data::Dataset;
use crate::net::{NetOutput, NetOutputGrad, NetworkConfig, ParamSet, ScoreNetwork};
use crate::schedule::ExitSchedule;

/// Decoupled-weight-decay Adam hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Cosine-anneal the learning rate to 0 over the run.
    #[serde(default)]
    pub cosine: bool,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

impl AdamWConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_adam_eps(),
            weight_decay: 0.0,
            cosine: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if !ok {
            return config("invalid optimizer hyper-parameters");
        }
        Ok(())
    }

    fn lr_at(&self, step: u64, total: u64) -> f64 {
        if self.cosine && total > 0 {
            let p = step as f64 / total as f64;
            0.5 * self.learning_rate * (1.0 + (std::f64::consts::PI * p).cos())
        } else {
            self.learning_rate
        }
    }
}

/// First and second moment buffers.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    m: ParamSet,
    v: ParamSet,
    steps: u64,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig, like: &ParamSet) -> Self {
        Self { cfg, m: like.zeros_like(), v: like.zeros_like(), steps: 0 }
    }

    /// One update with learning rate `lr`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, lr: f64) {
        self.steps += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - c.beta2.powi(self.steps as i32);
        let tensors = params.tensors_mut().iter_mut().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * gi;
                v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= lr * (mh / (vh.sqrt() + c.eps) + c.weight_decay * p.data[i]);
            }
        }
    }
}

/// Objective settings shared by pretraining and fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub iterations: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_pretrain_opt")]
    pub optimizer: AdamWConfig,
    /// Weight of the variational term when the network learns its variance.
    #[serde(default = "default_vlb_weight")]
    pub vlb_weight: f64,
    /// Emit a log row every this many steps (0 disables).
    #[serde(default = "default_log_every")]
    pub log_every: u64,
}

fn default_batch() -> usize {
    128
}
fn default_pretrain_opt() -> AdamWConfig {
    AdamWConfig::with_lr(1e-3)
}
fn default_finetune_opt() -> AdamWConfig {
    AdamWConfig::with_lr(2e-5)
}
fn default_vlb_weight() -> f64 {
    1e-3
}
fn default_log_every() -> u64 {
    100
}
fn default_ema() -> f64 {
    0.999
}
fn default_boost() -> f64 {
    2.0
}
fn default_region() -> f64 {
    0.5
}

impl PretrainConfig {
    pub fn new(iterations: u64) -> Self {
        Self {
            iterations,
            batch_size: default_batch(),
            optimizer: default_pretrain_opt(),
            vlb_weight: default_vlb_weight(),
            log_every: default_log_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 || !(self.vlb_weight >= 0.0) {
            return config("pretrain needs batch_size >= 1 and vlb_weight >= 0");
        }
        Ok(())
    }
}

/// Ends the λ boost phase when validation loss stops improving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    pub eval_every: u64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_val_batch")]
    pub val_batch: usize,
}

fn default_patience() -> usize {
    5
}
fn default_rel_tol() -> f64 {
    1e-3
}
fn default_val_batch() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    pub iterations: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_finetune_opt")]
    pub optimizer: AdamWConfig,
    #[serde(default = "default_ema")]
    pub ema_rate: f64,
    /// Steps spent in the λ boost phase before λ returns to 1.
    pub cycle_c: u64,
    #[serde(default = "default_boost")]
    pub lambda_boost: f64,
    #[serde(default = "default_region")]
    pub noise_region_start: f64,
    #[serde(default = "default_vlb_weight")]
    pub vlb_weight: f64,
    /// Replaces the fixed `cycle_c` trigger when set.
    #[serde(default)]
    pub plateau: Option<PlateauConfig>,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
}

impl FinetuneConfig {
    pub fn new(iterations: u64, cycle_c: u64) -> Self {
        Self {
            iterations,
            batch_size: default_batch(),
            optimizer: default_finetune_opt(),
            ema_rate: default_ema(),
            cycle_c,
            lambda_boost: default_boost(),
            noise_region_start: default_region(),
            vlb_weight: default_vlb_weight(),
            plateau: None,
            log_every: default_log_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(0.0..=1.0).contains(&self.ema_rate) {
            return config(format!("ema_rate must be in [0, 1], got {}", self.ema_rate));
        }
        if !(self.lambda_boost >= 1.0) {
            return config(format!("lambda_boost must be >= 1, got {}", self.lambda_boost));
        }
        if !(self.noise_region_start > 0.0 && self.noise_region_start < 1.0) {
            return config("noise_region_start must be in (0, 1)");
        }
        if self.batch_size == 0 || !(self.vlb_weight >= 0.0) {
            return config("finetune needs batch_size >= 1 and vlb_weight >= 0");
        }
        if let Some(p) = &self.plateau {
            if p.eval_every == 0 || p.patience == 0 || p.val_batch == 0 || !(p.rel_tol >= 0.0) {
                return config("invalid plateau settings");
            }
        }
        Ok(())
    }
}

/// Student, EMA teacher and optimizer state of one fine-tuning run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub student: ScoreNetwork,
    pub teacher: ParamSet,
    pub ema_rate: f64,
    pub cycle_c: u64,
    pub lambda_boost: f64,
    pub noise_region_start: f64,
    pub optimizer: AdamW,
    pub step: u64,
    /// Set when a plateau trigger ends the boost phase before `cycle_c`.
    pub boost_ended_at: Option<u64>,
}

impl TrainState {
    pub fn new(pretrained: &ScoreNetwork, cfg: &FinetuneConfig) -> Result<Self> {
        cfg.validate()?;
        let cycle_c = if cfg.plateau.is_some() { u64::MAX } else { cfg.cycle_c };
        Ok(Self {
            student: pretrained.clone(),
            teacher: pretrained.params().clone(),
            ema_rate: cfg.ema_rate,
            cycle_c,
            lambda_boost: cfg.lambda_boost,
            noise_region_start: cfg.noise_region_start,
            optimizer: AdamW::new(cfg.optimizer.clone(), pretrained.params()),
            step: 0,
            boost_ended_at: None,
        })
    }

    pub fn boost_active(&self) -> bool {
        self.step < self.cycle_c && self.boost_ended_at.is_none()
    }

    pub fn teacher_network(&self) -> Result<ScoreNetwork> {
        ScoreNetwork::from_params(self.student.config().clone(), self.teacher.clone())
    }
}

/// `θ_T ← α·θ_T + (1−α)·θ_S`, elementwise.
pub fn ema_update(teacher: &mut ParamSet, student: &ParamSet, alpha: f64) -> Result<()> {
    if !teacher.same_layout(student) {
        return contract("ema_update: teacher and student shapes differ");
    }
    if alpha == 1.0 {
        return Ok(());
    }
    for (t, s) in teacher.tensors_mut().iter_mut().zip(student.tensors()) {
        if alpha == 0.0 {
            t.data.copy_from_slice(&s.data);
        } else {
            for (a, b) in t.data.iter_mut().zip(&s.data) {
                *a = alpha * *a + (1.0 - alpha) * b;
            }
        }
    }
    Ok(())
}

/// λ weight of step `t` given the state's phase.
pub fn lambda_schedule(t: usize, steps: usize, state: &TrainState) -> f64 {
    boost_weight(t, steps, state.boost_active(), state.lambda_boost, state.noise_region_start)
}

fn boost_weight(t: usize, steps: usize, active: bool, boost: f64, region_start: f64) -> f64 {
    if active && t as f64 / steps as f64 > region_start {
        boost
    } else {
        1.0
    }
}

/// True when the mean of the last `patience` losses has not improved on the
/// best earlier loss by more than `rel_tol` (relative).
pub fn plateau_check(history: &[f64], patience: usize, rel_tol: f64) -> bool {
    if patience == 0 || history.len() < patience + 1 || history.len() < 2 {
        return false;
    }
    let split = history.len() - patience;
    let best = history[..split].iter().copied().fold(f64::INFINITY, f64::min);
    let recent = history[split..].iter().sum::<f64>() / patience as f64;
    recent >= best - rel_tol * best.abs()
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub loss: f64,
    pub lambda_boost_active: bool,
}

/// Loss value and output gradient for a batch: mean over examples of
/// `λ(t)·‖ε − ε̂‖²`, plus `vlb_weight` times the variational term when the
/// network learns its variance. The variational term sees the mean through
/// a stop-gradient, so only the variance head learns from it.
pub fn hybrid_loss(
    out: &NetOutput,
    x0: ArrayView2<f64>,
    x_t: ArrayView2<f64>,
    eps: ArrayView2<f64>,
    t: &[usize],
    weights: &[f64],
    vlb_weight: f64,
    ns: &NoiseSchedule,
) -> Result<(f64, NetOutputGrad)> {
    let (n, d) = eps.dim();
    if out.eps.dim() != (n, d) || t.len() != n || weights.len() != n {
        return contract("hybrid_loss: shape mismatch");
    }
    let inv = 1.0 / n as f64;
    let mut value = 0.0;
    let mut g_eps = Array2::zeros((n, d));
    for i in 0..n {
        let w = weights[i];
        for j in 0..d {
            let r = out.eps[[i, j]] - eps[[i, j]];
            value += w * r * r * inv;
            g_eps[[i, j]] = 2.0 * w * r * inv;
        }
    }
    let g_v = match &out.v {
        None => None,
        Some(v) => {
            let mut g = Array2::zeros((n, d));
            if vlb_weight > 0.0 {
                for i in 0..n {
                    let ti = t[i];
                    if ti == 1 {
                        continue;
                    }
                    let xt = x_t.row(i).to_vec();
                    let (mq, var_q) = posterior_q(&xt, &x0.row(i).to_vec(), ti, ns)?;
                    let mp = mu_theta(&xt, &out.eps.row(i).to_vec(), ti, ns)?;
                    let (lb, lbt) = (ns.beta(ti).ln(), ns.beta_tilde(ti).ln());
                    for j in 0..d {
                        let lv = v[[i, j]] * lb + (1.0 - v[[i, j]]) * lbt;
                        value += vlb_weight * inv * gaussian_kl(mq[j], var_q, var_q.ln(), mp[j], lv);
                        g[[i, j]] = vlb_weight * inv * gaussian_kl_dlogvar(mq[j], var_q, mp[j], lv) * (lb - lbt);
                    }
                }
            }
            Some(g)
        }
    };
    Ok((value, NetOutputGrad { eps: g_eps, v: g_v }))
}

struct Batch {
    x0: Array2<f64>,
    x_t: Array2<f64>,
    eps: Array2<f64>,
    t: Vec<usize>,
}

fn draw_batch<R: Rng>(rng: &mut R, data: &Dataset, n: usize, ns: &NoiseSchedule) -> Result<Batch> {
    draw_batch_in(rng, data, n, ns, (1, ns.steps()))
}

fn draw_batch_in<R: Rng>(rng: &mut R, data: &Dataset, n: usize, ns: &NoiseSchedule, window: (usize, usize)) -> Result<Batch> {
    let x0 = data.sample_with(rng, n);
    let t: Vec<usize> = (0..n).map(|_| rng.gen_range(window.0..=window.1)).collect();
    let eps = Array2::from_shape_fn(x0.dim(), |_| StandardNormal.sample(rng));
    let x_t = perturb_batch(x0.view(), &t, eps.view(), ns)?;
    Ok(Batch { x0, x_t, eps, t })
}

fn check_compat(cfg: &NetworkConfig, data: &Dataset, ns: &NoiseSchedule) -> Result<()> {
    data.validate()?;
    if cfg.in_dim != data.dim() {
        return config(format!("network in_dim {} differs from dataset dim {}", cfg.in_dim, data.dim()));
    }
    if cfg.diffusion_steps != ns.steps() {
        return config(format!("network expects T = {}, schedule has {}", cfg.diffusion_steps, ns.steps()));
    }
    Ok(())
}

fn diverged(step: u64, loss: f64, what: &str) -> Error {
    Error::Diverged { step, loss, detail: format!("{what}: non-finite loss; lower the learning rate") }
}

/// Result of a pretraining run.
#[derive(Debug, Clone)]
pub struct PretrainRun {
    pub network: ScoreNetwork,
    pub log: Vec<LogRow>,
}

/// Trains the full network from a seeded initialization with `λ ≡ 1`.
pub fn pretrain(
    net_cfg: &NetworkConfig,
    cfg: &PretrainConfig,
    data: &Dataset,
    ns: &NoiseSchedule,
    seed: u64,
) -> Result<PretrainRun> {
    let net = ScoreNetwork::new(net_cfg.clone(), seed)?;
    continue_training(net, cfg, data, ns, seed)
}

/// Full-depth training of an existing network, used both for pretraining
/// and for the "further trained" baseline.
pub fn continue_training(
    net: ScoreNetwork,
    cfg: &PretrainConfig,
    data: &Dataset,
    ns: &NoiseSchedule,
    seed: u64,
) -> Result<PretrainRun> {
    train_on_window(net, cfg, data, ns, seed, (1, ns.steps()))
}

/// Steps `t ∈ {lo..=hi}` whose interval index is `k` out of `intervals`.
pub fn interval_window(k: usize, intervals: usize, steps: usize) -> Result<(usize, usize)> {
    if intervals == 0 || k >= intervals {
        return config(format!("interval {k} outside 0..{intervals}"));
    }
    let ts: Vec<usize> = (1..=steps).filter(|&t| crate::schedule::interval_index(t, steps, intervals) == k).collect();
    match (ts.first(), ts.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => config(format!("interval {k} holds no steps")),
    }
}

/// Full-depth training with `t` restricted to `window` (inclusive); used to
/// train per-interval experts.
pub fn train_on_window(
    mut net: ScoreNetwork,
    cfg: &PretrainConfig,
    data: &Dataset,
    ns: &NoiseSchedule,
    seed: u64,
    window: (usize, usize),
) -> Result<PretrainRun> {
    cfg.validate()?;
    if window.0 < 1 || window.0 > window.1 || window.1 > ns.steps() {
        return config(format!("training window {window:?} outside 1..={}", ns.steps()));
    }
    check_compat(net.config(), data, ns)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut opt = AdamW::new(cfg.optimizer.clone(), net.params());
    let depth = net.max_depth();
    let depths = vec![depth; cfg.batch_size];
    let weights = vec![1.0; cfg.batch_size];
    let mut log = Vec::new();
    for step in 0..cfg.iterations {
        let b = draw_batch_in(&mut rng, data, cfg.batch_size, ns, window)?;
        let (loss, grads) = net.param_gradients(b.x_t.view(), &b.t, &depths, |out| {
            hybrid_loss(out, b.x0.view(), b.x_t.view(), b.eps.view(), &b.t, &weights, cfg.vlb_weight, ns)
        })?;
        if !loss.is_finite() {
            return Err(diverged(step, loss, "pretrain"));
        }
        let lr = cfg.optimizer.lr_at(step, cfg.iterations);
        opt.step(net.params_mut(), &grads, lr);
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.iterations) {
            log.push(LogRow { step, loss, lambda_boost_active: false });
        }
    }
    Ok(PretrainRun { network: net, log })
}

/// Result of an early-exit fine-tuning run; `teacher` is the evaluated model.
#[derive(Debug, Clone)]
pub struct FinetuneRun {
    pub teacher: ScoreNetwork,
    pub student: ScoreNetwork,
    pub log: Vec<LogRow>,
    /// Step at which λ returned to 1 (`None` if the boost phase never ended).
    pub lambda_reset_step: Option<u64>,
}

/// Mean unweighted ε-loss of `net` under `sched` on a fixed batch.
fn validation_loss(net: &ScoreNetwork, sched: &ExitSchedule, b: &Batch, ns: &NoiseSchedule) -> Result<f64> {
    let depths: Vec<usize> = b.t.iter().map(|&t| sched.lookup_blocks(t, ns.steps())).collect();
    let out = net.forward_depths(b.x_t.view(), &b.t, &depths)?;
    let n = b.t.len() as f64;
    Ok(out.eps.iter().zip(b.eps.iter()).map(|(a, e)| (a - e) * (a - e)).sum::<f64>() / n)
}

/// Early-exit fine-tuning: each example draws `t`, is perturbed, and runs
/// through the first `S(t)` blocks; the student takes an AdamW step on the
/// λ-weighted loss and the teacher follows by EMA.
pub fn finetune_ase(
    pretrained: &ScoreNetwork,
    sched: &ExitSchedule,
    data: &Dataset,
    cfg: &FinetuneConfig,
    ns: &NoiseSchedule,
    seed: u64,
) -> Result<FinetuneRun> {
    sched.check_bound(pretrained.architecture())?;
    check_compat(pretrained.config(), data, ns)?;
    let mut state = TrainState::new(pretrained, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let steps = ns.steps();
    let val = match &cfg.plateau {
        Some(p) => {
            let mut vr = ChaCha8Rng::seed_from_u64(seed);
            vr.set_stream(3);
            Some(draw_batch(&mut vr, data, p.val_batch, ns)?)
        }
        None => None,
    };
    let mut val_hist = Vec::new();
    let mut log = Vec::new();
    let mut reset = None;
    while state.step < cfg.iterations {
        let step = state.step;
        let active = state.boost_active();
        let b = draw_batch(&mut rng, data, cfg.batch_size, ns)?;
        let depths: Vec<usize> = b.t.iter().map(|&t| sched.lookup_blocks(t, steps)).collect();
        let weights: Vec<f64> = b.t.iter().map(|&t| lambda_schedule(t, steps, &state)).collect();
        let (loss, grads) = state.student.param_gradients(b.x_t.view(), &b.t, &depths, |out| {
            hybrid_loss(out, b.x0.view(), b.x_t.view(), b.eps.view(), &b.t, &weights, cfg.vlb_weight, ns)
        })?;
        if !loss.is_finite() {
            return Err(diverged(step, loss, "finetune"));
        }
        let lr = cfg.optimizer.lr_at(step, cfg.iterations);
        state.optimizer.step(state.student.params_mut(), &grads, lr);
        ema_update(&mut state.teacher, state.student.params(), state.ema_rate)?;
        state.step += 1;
        if let (Some(p), Some(vb)) = (&cfg.plateau, &val) {
            if active && state.step % p.eval_every == 0 {
                val_hist.push(validation_loss(&state.student, sched, vb, ns)?);
                if plateau_check(&val_hist, p.patience, p.rel_tol) {
                    state.boost_ended_at = Some(state.step);
                }
            }
        }
        if active && !state.boost_active() {
            reset = Some(state.step);
        }
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.iterations) {
            log.push(LogRow { step, loss, lambda_boost_active: active });
        }
    }
    Ok(FinetuneRun {
        teacher: state.teacher_network()?,
        student: state.student,
        log,
        lambda_reset_step: reset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::gaussian_oracle_eps;
    use crate::net::Architecture;

    fn small_cfg() -> NetworkConfig {
        NetworkConfig::new(Architecture::Stack { blocks: 3 }, 16, 1)
    }

    #[test]
    fn ema_edges() {
        let net = ScoreNetwork::new(small_cfg(), 1).unwrap();
        let other = ScoreNetwork::new(small_cfg(), 2).unwrap();
        let mut t = net.params().clone();
        ema_update(&mut t, other.params(), 1.0).unwrap();
        assert_eq!(&t, net.params());
        ema_update(&mut t, other.params(), 0.0).unwrap();
        assert_eq!(&t, other.params());
        let mut a = ParamSet::new(vec![crate::net::Tensor { name: "a".into(), shape: vec![1], data: vec![1.0] }]);
        let b = ParamSet::new(vec![crate::net::Tensor { name: "a".into(), shape: vec![1], data: vec![0.0] }]);
        ema_update(&mut a, &b, 0.999).unwrap();
        assert_eq!(a.tensors()[0].data[0], 0.999);
    }

    #[test]
    fn lambda_phases() {
        let net = ScoreNetwork::new(small_cfg(), 1).unwrap();
        let mut st = TrainState::new(&net, &FinetuneConfig::new(10, 4)).unwrap();
        assert_eq!(lambda_schedule(900, 1000, &st), 2.0);
        assert_eq!(lambda_schedule(500, 1000, &st), 1.0);
        st.step = 4;
        assert_eq!(lambda_schedule(900, 1000, &st), 1.0);
    }

    #[test]
    fn plateau_cases() {
        let dec: Vec<f64> = (0..12).map(|k| 0.9f64.powi(k)).collect();
        for n in 2..=dec.len() {
            assert!(!plateau_check(&dec[..n], 5, 1e-3));
        }
        assert!(plateau_check(&[1.0; 6], 5, 1e-3));
        assert!(!plateau_check(&[1.0; 5], 5, 1e-3));
    }

    #[test]
    fn config_validation() {
        let mut c = FinetuneConfig::new(1, 1);
        c.ema_rate = 1.5;
        assert!(c.validate().is_err());
        let mut c = FinetuneConfig::new(1, 1);
        c.lambda_boost = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn pretrain_beats_untrained_on_gaussian() {
        let ns = NoiseSchedule::standard();
        let data = Dataset::gaussian(vec![0.5], 0.8);
        let mut cfg = PretrainConfig::new(2000);
        cfg.batch_size = 64;
        let run = pretrain(&small_cfg(), &cfg, &data, &ns, 7).unwrap();
        let init = ScoreNetwork::new(small_cfg(), 7).unwrap();
        let mse = |net: &ScoreNetwork| {
            let mut err = 0.0;
            let mut n = 0.0;
            for t in (10..=1000).step_by(10) {
                let x = Array2::from_shape_fn((16, 1), |(i, _)| -2.0 + 0.25 * i as f64);
                let e = net.forward_full(x.view(), &vec![t; 16]).unwrap().eps;
                for i in 0..16 {
                    let o = gaussian_oracle_eps(&[x[[i, 0]]], t, &[0.5], 0.8, &ns).unwrap()[0];
                    err += (e[[i, 0]] - o).powi(2);
                    n += 1.0;
                }
            }
            err / n
        };
        let (before, after) = (mse(&init), mse(&run.network));
        assert!(after * 10.0 <= before, "{before} -> {after}");
    }
}
