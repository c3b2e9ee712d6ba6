//! Wall-clock and FLOP acceleration of exit schedules against the full network.

use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseSchedule;
use crate::error::{config, Result};
use crate::eval::data::Dataset;
use crate::eval::report::{Cell, Table};
use crate::eval::{quality, MetricConfig, Quality};
use crate::net::ScoreNetwork;
use crate::sampler::{median, sample_loop, SamplerConfig};
use crate::schedule::{predicted_acceleration, ExitSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub schedule: String,
    pub blocks: Vec<usize>,
    pub mean_blocks: f64,
    pub predicted_accel: f64,
    /// `1 − flops(schedule)/flops(full)` over the whole run.
    pub flop_accel: f64,
    pub total_flops: u64,
    /// `1 − median time(schedule)/median time(full)`.
    pub measured_accel: f64,
    pub median_time_s: f64,
    pub quality: Option<Quality>,
}

/// Times `repeats` sampling runs per schedule, interleaved with runs of the
/// full network, on the calling thread. Network forward time only.
pub fn bench_acceleration(
    net: &ScoreNetwork,
    schedules: &[ExitSchedule],
    cfg: &SamplerConfig,
    ns: &NoiseSchedule,
    repeats: usize,
    eval: Option<(&Dataset, &MetricConfig)>,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return config("bench needs repeats >= 1");
    }
    let arch = net.architecture();
    for s in schedules {
        s.check_bound(arch)?;
    }
    let reference = eval.map(|(d, mc)| mc.reference(d));
    let mut base_times = Vec::with_capacity(repeats);
    let mut times = vec![Vec::with_capacity(repeats); schedules.len()];
    let mut flops = vec![0u64; schedules.len()];
    let mut base_flops = 0;
    let mut qualities = vec![None; schedules.len()];
    for r in 0..repeats {
        let (_, st) = sample_loop(net, None, cfg, ns)?;
        base_times.push(st.total_time_s);
        base_flops = st.total_flops;
        for (i, s) in schedules.iter().enumerate() {
            let (x, st) = sample_loop(net, Some(s), cfg, ns)?;
            times[i].push(st.total_time_s);
            flops[i] = st.total_flops;
            if r == 0 {
                if let (Some(refs), Some((_, mc))) = (&reference, eval) {
                    qualities[i] = Some(quality(x.view(), refs.view(), mc)?);
                }
            }
        }
    }
    let base = median(&base_times);
    schedules
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let t = median(&times[i]);
            Ok(BenchRow {
                schedule: s.name.clone(),
                blocks: s.blocks.clone(),
                mean_blocks: s.mean_blocks(),
                predicted_accel: predicted_acceleration(s, arch)?,
                flop_accel: 1.0 - flops[i] as f64 / base_flops as f64,
                total_flops: flops[i],
                measured_accel: if base > 0.0 { 1.0 - t / base } else { 0.0 },
                median_time_s: t,
                quality: qualities[i],
            })
        })
        .collect()
}

/// Benchmark rows as a report table; timing columns carry the `wall_` prefix.
pub fn bench_table(rows: &[BenchRow], digest: &str) -> Result<Table> {
    let mut t = Table::new(
        "bench",
        digest,
        &[
            "schedule",
            "blocks",
            "mean_blocks",
            "predicted_accel",
            "flop_accel",
            "total_flops",
            "sliced_wasserstein",
            "gaussian_frechet",
            "wall_measured_accel",
            "wall_median_time_s",
        ],
    );
    for r in rows {
        let row_str = r.blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
        let (sw, fr): (Cell, Cell) = match r.quality {
            Some(q) => (q.sliced_wasserstein.into(), q.gaussian_frechet.into()),
            None => ("".into(), "".into()),
        };
        t.push(vec![
            r.schedule.clone().into(),
            row_str.into(),
            r.mean_blocks.into(),
            r.predicted_accel.into(),
            r.flop_accel.into(),
            r.total_flops.into(),
            sw,
            fr,
            r.measured_accel.into(),
            r.median_time_s.into(),
        ])?;
    }
    Ok(t)
}
