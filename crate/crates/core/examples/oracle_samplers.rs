//! The four reverse-process solvers driven by the exact Gaussian oracle.
//!
//! cargo run --example oracle_samplers

use ase::diffusion::NoiseSchedule;
use ase::model::GaussianOracle;
use ase::sampler::{sample_loop, SamplerConfig, SamplerKind};
use ndarray::Axis;

fn main() -> ase::Result<()> {
    let ns = NoiseSchedule::standard();
    let oracle = GaussianOracle::new(vec![0.5, -1.0], 0.8, ns.clone())?;
    println!("data: mean [0.5, -1.0], std 0.8");
    for (kind, n) in [(SamplerKind::Ddpm, 1000), (SamplerKind::Ddim, 50), (SamplerKind::Em, 1000), (SamplerKind::Langevin, 100)] {
        let cfg = SamplerConfig::new(kind, n, 4000, 1);
        let (x, stats) = sample_loop(&oracle, None, &cfg, &ns)?;
        let m = x.mean_axis(Axis(0)).unwrap();
        let s = x.std_axis(Axis(0), 1.0);
        println!(
            "{kind:?}-{n}: mean {m:.3}, std {s:.3}, {} evaluations, {:.2}s",
            stats.per_step_t.len(),
            stats.total_time_s
        );
    }
    Ok(())
}
