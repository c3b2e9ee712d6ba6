//! Experiment suites: schedule trade-off, negative transfer and ablation.
//!
//! Each runner is a pure function of its inputs and seeds, apart from the
//! `wall_` columns of the tables it emits.

use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseSchedule;
use crate::error::{config, Result};
use crate::eval::data::Dataset;
use crate::eval::report::{Cell, Table};
use crate::eval::{quality, MetricConfig, Quality};
use crate::model::{EpsModel, IntervalRouter, Route};
use crate::net::ScoreNetwork;
use crate::sampler::{sample_loop, RunStats, SamplerConfig, SamplerKind};
use crate::schedule::{predicted_acceleration, ExitSchedule, ScheduleSpec};
use crate::train::{continue_training, finetune_ase, interval_window, train_on_window, FinetuneConfig, PretrainConfig};

/// Shared inputs of every suite.
#[derive(Debug, Clone, Copy)]
pub struct Lab<'a> {
    pub pretrained: &'a ScoreNetwork,
    pub data: &'a Dataset,
    pub ns: &'a NoiseSchedule,
    pub metric: &'a MetricConfig,
    pub config_digest: &'a str,
}

impl Lab<'_> {
    fn evaluate(&self, model: &dyn EpsModel, exit: Option<&ExitSchedule>, solver: &SamplerConfig, seed: u64) -> Result<(Quality, RunStats)> {
        let cfg = SamplerConfig { batch: self.metric.n_samples, seed: solver.seed.wrapping_add(seed), ..solver.clone() };
        let (x, stats) = sample_loop(model, exit, &cfg, self.ns)?;
        let reference = self.metric.reference(self.data);
        Ok((quality(x.view(), reference.view(), self.metric)?, stats))
    }
}

pub fn solver_label(s: &SamplerConfig) -> String {
    let kind = match s.kind {
        SamplerKind::Ddpm => "ddpm",
        SamplerKind::Ddim => "ddim",
        SamplerKind::Em => "em",
        SamplerKind::Langevin => "langevin",
    };
    format!("{kind}-{}", s.n_steps)
}

const REFERENCE_NOTE: &str = "quality is measured against a fresh draw of equal size from the data distribution";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffConfig {
    pub schedules: Vec<ScheduleSpec>,
    pub finetune: FinetuneConfig,
    pub solvers: Vec<SamplerConfig>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
}

fn default_intervals() -> usize {
    crate::schedule::DEFAULT_INTERVALS
}

const TRADEOFF_COLUMNS: [&str; 12] = [
    "schedule",
    "seed",
    "solver",
    "finetune_iterations",
    "sliced_wasserstein",
    "gaussian_frechet",
    "frechet_ridge",
    "predicted_accel",
    "flop_accel",
    "total_flops",
    "mean_blocks",
    "wall_time_s",
];

/// For every seed: the pretrained full network as a reference row, then each
/// schedule fine-tuned with early exit and sampled with every solver.
pub fn run_tradeoff_experiment(lab: &Lab, cfg: &TradeoffConfig) -> Result<Table> {
    if cfg.seeds.is_empty() || cfg.solvers.is_empty() {
        return config("trade-off experiment needs seeds and solvers");
    }
    let arch = lab.pretrained.architecture();
    let schedules = cfg.schedules.iter().map(|s| s.resolve(arch, cfg.intervals)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("tradeoff", lab.config_digest, &TRADEOFF_COLUMNS);
    table.notes.push(REFERENCE_NOTE.into());
    for &seed in &cfg.seeds {
        let mut full_flops = Vec::new();
        for solver in &cfg.solvers {
            let (q, st) = lab.evaluate(lab.pretrained, None, solver, seed)?;
            full_flops.push(st.total_flops);
            table.push(tradeoff_row("full", seed, solver, 0, q, 0.0, 0.0, &st, arch.block_limit() as f64))?;
        }
        for sched in &schedules {
            let run = finetune_ase(lab.pretrained, sched, lab.data, &cfg.finetune, lab.ns, seed)?;
            let pred = predicted_acceleration(sched, arch)?;
            for (solver, &ff) in cfg.solvers.iter().zip(&full_flops) {
                let (q, st) = lab.evaluate(&run.teacher, Some(sched), solver, seed)?;
                let fa = 1.0 - st.total_flops as f64 / ff as f64;
                table.push(tradeoff_row(&sched.name, seed, solver, cfg.finetune.iterations, q, pred, fa, &st, sched.mean_blocks()))?;
            }
        }
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn tradeoff_row(
    name: &str,
    seed: u64,
    solver: &SamplerConfig,
    iters: u64,
    q: Quality,
    pred: f64,
    flop_accel: f64,
    st: &RunStats,
    mean_blocks: f64,
) -> Vec<Cell> {
    vec![
        name.into(),
        seed.into(),
        solver_label(solver).into(),
        iters.into(),
        q.sliced_wasserstein.into(),
        q.gaussian_frechet.into(),
        q.frechet_ridge.into(),
        pred.into(),
        flop_accel.into(),
        st.total_flops.into(),
        mean_blocks.into(),
        st.total_time_s.into(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeTransferConfig {
    /// Continued full training of the baseline.
    pub further_training: PretrainConfig,
    /// Training of each per-interval expert, starting from the baseline.
    pub expert_training: PretrainConfig,
    /// Schedule of the reduced model serving interval `k` in mixed-k rows.
    pub reduced: ScheduleSpec,
    pub finetune: FinetuneConfig,
    pub mixed_ks: Vec<usize>,
    pub solver: SamplerConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
}

/// `{baseline, further_trained, multi_experts, mixed-k…}` quality per seed.
pub fn run_negative_transfer_suite(lab: &Lab, cfg: &NegativeTransferConfig) -> Result<Table> {
    let k_total = cfg.intervals;
    if k_total == 0 {
        return config("negative-transfer suite needs at least one interval");
    }
    if let Some(&k) = cfg.mixed_ks.iter().find(|&&k| k >= k_total) {
        return config(format!("mixed-k index {k} outside 0..{k_total}"));
    }
    if cfg.seeds.is_empty() {
        return config("negative-transfer suite needs seeds");
    }
    let arch = lab.pretrained.architecture();
    let reduced = cfg.reduced.resolve(arch, k_total)?;
    let steps = lab.ns.steps();
    let mut table = Table::new(
        "negative_transfer",
        lab.config_digest,
        &["configuration", "seed", "solver", "sliced_wasserstein", "gaussian_frechet", "total_flops", "wall_time_s"],
    );
    table.notes.push(REFERENCE_NOTE.into());
    let push = |table: &mut Table, name: String, seed: u64, q: Quality, st: &RunStats| {
        table.push(vec![
            name.into(),
            seed.into(),
            solver_label(&cfg.solver).into(),
            q.sliced_wasserstein.into(),
            q.gaussian_frechet.into(),
            st.total_flops.into(),
            st.total_time_s.into(),
        ])
    };
    for &seed in &cfg.seeds {
        let (q, st) = lab.evaluate(lab.pretrained, None, &cfg.solver, seed)?;
        push(&mut table, "baseline".into(), seed, q, &st)?;

        let further = continue_training(lab.pretrained.clone(), &cfg.further_training, lab.data, lab.ns, seed)?.network;
        let (q, st) = lab.evaluate(&further, None, &cfg.solver, seed)?;
        push(&mut table, "further_trained".into(), seed, q, &st)?;

        let experts = (0..k_total)
            .map(|k| {
                let window = interval_window(k, k_total, steps)?;
                let expert_seed = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
                if cfg.expert_training.iterations == 0 {
                    return Ok(lab.pretrained.clone());
                }
                Ok(train_on_window(lab.pretrained.clone(), &cfg.expert_training, lab.data, lab.ns, expert_seed, window)?.network)
            })
            .collect::<Result<Vec<_>>>()?;
        let router = IntervalRouter::new(experts.iter().map(|net| Route { net, blocks: None }).collect(), steps)?;
        let (q, st) = lab.evaluate(&router, None, &cfg.solver, seed)?;
        push(&mut table, "multi_experts".into(), seed, q, &st)?;

        if !cfg.mixed_ks.is_empty() {
            let ase = finetune_ase(lab.pretrained, &reduced, lab.data, &cfg.finetune, lab.ns, seed)?.teacher;
            for &k in &cfg.mixed_ks {
                let routes = (0..k_total)
                    .map(|i| if i == k { Route { net: &ase, blocks: Some(reduced.blocks[k]) } } else { Route { net: lab.pretrained, blocks: None } })
                    .collect();
                let router = IntervalRouter::new(routes, steps)?;
                let (q, st) = lab.evaluate(&router, None, &cfg.solver, seed)?;
                push(&mut table, format!("mixed-{k}"), seed, q, &st)?;
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    /// Rows of retained blocks per interval; all must share the same total.
    pub rows: Vec<Vec<usize>>,
    pub finetune: FinetuneConfig,
    /// Two solver settings, the analog of a coarse and a fine step count.
    pub solvers: Vec<SamplerConfig>,
    pub seeds: Vec<u64>,
}

/// Rows with equal block totals, validated and bound to the network.
pub fn ablation_schedules(rows: &[Vec<usize>], arch: crate::net::Architecture) -> Result<Vec<ExitSchedule>> {
    let Some(first) = rows.first() else {
        return config("ablation needs at least one row");
    };
    let total: usize = first.iter().sum();
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let s: usize = r.iter().sum();
            if s != total {
                return config(format!("ablation row {} sums to {s}, expected {total}", i + 1));
            }
            ExitSchedule::new(format!("schedule-{}", i + 1), arch, r.clone())
        })
        .collect()
}

/// Fine-tunes each ablation row and scores it under every solver.
pub fn run_ablation_schedules(lab: &Lab, cfg: &AblationConfig) -> Result<Table> {
    let arch = lab.pretrained.architecture();
    let schedules = ablation_schedules(&cfg.rows, arch)?;
    if cfg.solvers.is_empty() || cfg.seeds.is_empty() {
        return config("ablation needs solvers and seeds");
    }
    let mut table = Table::new(
        "ablation",
        lab.config_digest,
        &["schedule", "blocks", "seed", "solver", "sliced_wasserstein", "gaussian_frechet", "predicted_accel", "wall_time_s"],
    );
    table.notes.push(REFERENCE_NOTE.into());
    for &seed in &cfg.seeds {
        for sched in &schedules {
            let teacher = finetune_ase(lab.pretrained, sched, lab.data, &cfg.finetune, lab.ns, seed)?.teacher;
            let pred = predicted_acceleration(sched, arch)?;
            let row = sched.blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
            for solver in &cfg.solvers {
                let (q, st) = lab.evaluate(&teacher, Some(sched), solver, seed)?;
                table.push(vec![
                    sched.name.clone().into(),
                    row.clone().into(),
                    seed.into(),
                    solver_label(solver).into(),
                    q.sliced_wasserstein.into(),
                    q.gaussian_frechet.into(),
                    pred.into(),
                    st.total_time_s.into(),
                ])?;
            }
        }
    }
    Ok(table)
}
