//! Time-dependent exit schedules and the acceleration cost model.
//!
//! A schedule splits `u ∈ [0, 1]` into `K` intervals (ten by default) and
//! assigns each a retained-block count `S_k`. Rows are ordered from the data
//! interval `[0, 0.1)` to the noise interval `[0.9, 1]`. A step `t` is placed
//! by `u′ = (t − 1)/T`, intervals are left-closed and right-open, and the
//! last interval is closed.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::net::Architecture;

pub const DEFAULT_INTERVALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitSchedule {
    pub name: String,
    pub arch: Architecture,
    /// Retained blocks per interval, data side first.
    pub blocks: Vec<usize>,
    /// Interval left edges in `[0, 1)`, starting at 0. `None` means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
}

impl ExitSchedule {
    pub fn new(name: impl Into<String>, arch: Architecture, blocks: Vec<usize>) -> Result<Self> {
        let s = Self { name: name.into(), arch, blocks, edges: None };
        s.validate()?;
        Ok(s)
    }

    /// Every interval keeps the full network.
    pub fn all_keep(arch: Architecture, intervals: usize) -> Self {
        Self { name: "all-keep".into(), arch, blocks: vec![arch.block_limit(); intervals], edges: None }
    }

    pub fn with_edges(mut self, edges: Vec<f64>) -> Result<Self> {
        self.edges = Some(edges);
        self.validate()?;
        Ok(self)
    }

    pub fn intervals(&self) -> usize {
        self.blocks.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.blocks.is_empty() {
            return config(format!("schedule `{}` has no intervals", self.name));
        }
        let limit = self.arch.block_limit();
        if let Some(bad) = self.blocks.iter().find(|&&s| s == 0 || s > limit) {
            return config(format!("schedule `{}`: block count {bad} outside 1..={limit}", self.name));
        }
        if let Some(edges) = &self.edges {
            let ok = edges.len() == self.blocks.len()
                && edges[0] == 0.0
                && edges.windows(2).all(|w| w[0] < w[1])
                && edges.last().is_some_and(|e| *e < 1.0);
            if !ok {
                return config(format!("schedule `{}`: edges must start at 0, increase and stay below 1", self.name));
            }
        }
        Ok(())
    }

    /// Checks that the schedule was built for `arch`.
    pub fn check_bound(&self, arch: Architecture) -> Result<()> {
        if self.arch != arch {
            return Err(Error::Architecture(format!(
                "schedule `{}` is bound to {:?}, network is {:?}",
                self.name, self.arch, arch
            )));
        }
        Ok(())
    }

    /// Interval index of step `t` out of `steps`.
    pub fn interval_of(&self, t: usize, steps: usize) -> usize {
        match &self.edges {
            None => interval_index(t, steps, self.intervals()),
            Some(edges) => {
                let u = (t - 1) as f64 / steps as f64;
                edges.iter().rposition(|e| *e <= u).unwrap_or(0)
            }
        }
    }

    /// Retained-block count `S(t)`.
    pub fn lookup_blocks(&self, t: usize, steps: usize) -> usize {
        self.blocks[self.interval_of(t, steps)]
    }

    fn interval_widths(&self) -> Vec<f64> {
        match &self.edges {
            None => vec![1.0 / self.intervals() as f64; self.intervals()],
            Some(e) => (0..e.len()).map(|k| e.get(k + 1).copied().unwrap_or(1.0) - e[k]).collect(),
        }
    }

    /// Time-weighted mean of `S_k`.
    pub fn mean_blocks(&self) -> f64 {
        if self.edges.is_none() {
            return self.total_blocks() as f64 / self.intervals() as f64;
        }
        self.blocks.iter().zip(self.interval_widths()).map(|(s, w)| *s as f64 * w).sum()
    }

    pub fn total_blocks(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Proportional rescaling to a network of the same topology:
    /// `S′ = max(1, round(S·limit′/limit))`.
    pub fn scaled_to(&self, arch: Architecture) -> Result<Self> {
        if self.arch.is_stack() != arch.is_stack() {
            return Err(Error::Architecture(format!(
                "cannot rescale `{}` from {:?} to {:?}",
                self.name, self.arch, arch
            )));
        }
        let ratio = arch.block_limit() as f64 / self.arch.block_limit() as f64;
        let blocks = self
            .blocks
            .iter()
            .map(|&s| ((s as f64 * ratio).round() as usize).clamp(1, arch.block_limit()))
            .collect();
        let s = Self { name: self.name.clone(), arch, blocks, edges: self.edges.clone() };
        s.validate()?;
        Ok(s)
    }
}

/// `k = min(K − 1, ⌊K·(t − 1)/T⌋)` in exact integer arithmetic.
pub fn interval_index(t: usize, steps: usize, intervals: usize) -> usize {
    debug_assert!(t >= 1 && t <= steps);
    ((t - 1) * intervals / steps).min(intervals - 1)
}

/// One row of the published schedule table, at the published network size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub arch: Architecture,
    pub row: [usize; 10],
    /// Measured wall-clock acceleration reported alongside the row.
    pub reported_acceleration: f64,
}

pub const CATALOG: [CatalogEntry; 8] = [
    CatalogEntry { name: "D2-DiT", arch: Architecture::PAPER_DIT, row: [28, 28, 25, 25, 22, 22, 19, 19, 16, 16], reported_acceleration: 0.2343 },
    CatalogEntry { name: "D3-DiT", arch: Architecture::PAPER_DIT, row: [28, 28, 24, 24, 20, 20, 16, 16, 12, 12], reported_acceleration: 0.3046 },
    CatalogEntry { name: "D4-DiT", arch: Architecture::PAPER_DIT, row: [28, 28, 26, 24, 20, 18, 12, 10, 8, 8], reported_acceleration: 0.3456 },
    CatalogEntry { name: "D7-DiT", arch: Architecture::PAPER_DIT, row: [28, 28, 24, 21, 18, 15, 10, 10, 8, 8], reported_acceleration: 0.3892 },
    CatalogEntry { name: "D1-U-ViT", arch: Architecture::PAPER_UVIT, row: [6, 6, 4, 4, 2, 2, 2, 2, 1, 1], reported_acceleration: 0.213 },
    CatalogEntry { name: "D2-U-ViT", arch: Architecture::PAPER_UVIT, row: [5, 5, 4, 4, 2, 2, 1, 1, 1, 1], reported_acceleration: 0.248 },
    CatalogEntry { name: "D3-U-ViT", arch: Architecture::PAPER_UVIT, row: [3, 3, 2, 2, 2, 2, 1, 1, 1, 1], reported_acceleration: 0.297 },
    CatalogEntry { name: "D6-U-ViT", arch: Architecture::PAPER_UVIT, row: [2, 2, 2, 2, 1, 1, 1, 1, 1, 1], reported_acceleration: 0.326 },
];

pub fn catalog_entry(name: &str) -> Result<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name).ok_or_else(|| Error::Catalog(name.to_string()))
}

/// Catalog row at its published network size.
pub fn make_dn_schedule(name: &str) -> Result<ExitSchedule> {
    let e = catalog_entry(name)?;
    ExitSchedule::new(e.name, e.arch, e.row.to_vec())
}

/// `1 − mean(S)/N` for stacks; `1 − (enc + 1 + mean(S))/(enc + 1 + dec)` for
/// u-skip nets, where linear-only decoder blocks count as free.
pub fn predicted_acceleration(sched: &ExitSchedule, arch: Architecture) -> Result<f64> {
    sched.check_bound(arch)?;
    Ok(acceleration_from_mean(sched.mean_blocks(), arch))
}

/// Cost model weighted by the steps a solver actually visits instead of by
/// interval length.
pub fn predicted_acceleration_on_grid(sched: &ExitSchedule, arch: Architecture, grid: &[usize], steps: usize) -> Result<f64> {
    sched.check_bound(arch)?;
    if grid.is_empty() {
        return config("empty step grid");
    }
    let mean = grid.iter().map(|&t| sched.lookup_blocks(t, steps) as f64).sum::<f64>() / grid.len() as f64;
    Ok(acceleration_from_mean(mean, arch))
}

fn acceleration_from_mean(mean: f64, arch: Architecture) -> f64 {
    match arch {
        Architecture::Stack { blocks } => 1.0 - mean / blocks as f64,
        Architecture::USkip { encoder, decoder } => {
            let fixed = (encoder + 1) as f64;
            1.0 - (fixed + mean) / (fixed + decoder as f64)
        }
    }
}

/// Declarative schedule description used by configs and the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Published row; rescaled to the target network unless `scaled` is false.
    Catalog {
        name: String,
        #[serde(default = "yes")]
        scaled: bool,
    },
    AllKeep,
    /// Full depth at the data end, shrinking to `min_blocks` at the noise end.
    NoiseEasy { min_blocks: usize },
    /// Reverse of `NoiseEasy`.
    DataEasy { min_blocks: usize },
    /// Full depth everywhere except interval `k`, which takes the reduced row's count.
    MixedK { k: usize, reduced: Box<ScheduleSpec> },
    /// Explicit row (ablation schedules, custom experiments).
    Row {
        #[serde(default)]
        name: Option<String>,
        blocks: Vec<usize>,
    },
}

fn yes() -> bool {
    true
}

impl ScheduleSpec {
    /// Parses the command-line form: a catalog name, `all-keep`,
    /// `noise-easy:<min>`, `data-easy:<min>`, `paper:<name>` for an unscaled
    /// catalog row, or a comma-separated row.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all-keep" {
            return Ok(ScheduleSpec::AllKeep);
        }
        let min_of = |v: &str| v.parse::<usize>().map_err(|_| Error::Catalog(s.to_string()));
        if let Some(v) = s.strip_prefix("noise-easy:") {
            return Ok(ScheduleSpec::NoiseEasy { min_blocks: min_of(v)? });
        }
        if let Some(v) = s.strip_prefix("data-easy:") {
            return Ok(ScheduleSpec::DataEasy { min_blocks: min_of(v)? });
        }
        if let Some(name) = s.strip_prefix("paper:") {
            catalog_entry(name)?;
            return Ok(ScheduleSpec::Catalog { name: name.to_string(), scaled: false });
        }
        if s.contains(',') || s.parse::<usize>().is_ok() {
            let blocks = s
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Catalog(s.to_string()))?;
            return Ok(ScheduleSpec::Row { name: None, blocks });
        }
        catalog_entry(s)?;
        Ok(ScheduleSpec::Catalog { name: s.to_string(), scaled: true })
    }

    pub fn resolve(&self, arch: Architecture, intervals: usize) -> Result<ExitSchedule> {
        make_named_schedule(self, arch, intervals)
    }
}

/// Builds the schedule described by `spec` for a network of architecture `arch`.
pub fn make_named_schedule(spec: &ScheduleSpec, arch: Architecture, intervals: usize) -> Result<ExitSchedule> {
    if intervals == 0 {
        return config("schedule needs at least one interval");
    }
    let limit = arch.block_limit();
    match spec {
        ScheduleSpec::Catalog { name, scaled } => {
            let paper = make_dn_schedule(name)?;
            if !scaled {
                paper.check_bound(arch)?;
                return Ok(paper);
            }
            let mut s = paper.scaled_to(arch)?;
            s.name = format!("{name} (scaled)");
            Ok(s)
        }
        ScheduleSpec::AllKeep => Ok(ExitSchedule::all_keep(arch, intervals)),
        ScheduleSpec::NoiseEasy { min_blocks } => {
            ExitSchedule::new(format!("noise-easy:{min_blocks}"), arch, noise_easy_row(limit, *min_blocks, intervals)?)
        }
        ScheduleSpec::DataEasy { min_blocks } => {
            let mut row = noise_easy_row(limit, *min_blocks, intervals)?;
            row.reverse();
            ExitSchedule::new(format!("data-easy:{min_blocks}"), arch, row)
        }
        ScheduleSpec::MixedK { k, reduced } => {
            let reduced = make_named_schedule(reduced, arch, intervals)?;
            if *k >= reduced.intervals() {
                return config(format!("mixed-k index {k} outside 0..{}", reduced.intervals()));
            }
            let mut blocks = vec![limit; reduced.intervals()];
            blocks[*k] = reduced.blocks[*k];
            ExitSchedule::new(format!("mixed-{k}"), arch, blocks)
        }
        ScheduleSpec::Row { name, blocks } => {
            ExitSchedule::new(name.clone().unwrap_or_else(|| "custom".into()), arch, blocks.clone())
        }
    }
}

fn noise_easy_row(full: usize, min: usize, intervals: usize) -> Result<Vec<usize>> {
    if min == 0 || min > full {
        return config(format!("noise-easy minimum {min} outside 1..={full}"));
    }
    if intervals == 1 {
        return Ok(vec![full]);
    }
    let span = (full - min) as f64;
    Ok((0..intervals)
        .map(|k| (full as f64 - span * k as f64 / (intervals - 1) as f64).round() as usize)
        .collect())
}

/// Interval-to-expert routing of the multi-experts configuration: one full
/// model per interval, each serving only its own interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPartition {
    pub arch: Architecture,
    pub intervals: usize,
}

impl ExpertPartition {
    pub fn new(arch: Architecture, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return config("expert partition needs at least one interval");
        }
        arch.validate()?;
        Ok(Self { arch, intervals })
    }

    /// Index of the expert parameter set serving step `t`.
    pub fn expert_for(&self, t: usize, steps: usize) -> usize {
        interval_index(t, steps, self.intervals)
    }

    /// `(interval, schedule)` pairs; every expert runs at full depth.
    pub fn bindings(&self) -> Vec<(usize, ExitSchedule)> {
        (0..self.intervals)
            .map(|k| {
                let mut s = ExitSchedule::all_keep(self.arch, self.intervals);
                s.name = format!("expert-{k}");
                (k, s)
            })
            .collect()
    }
}
