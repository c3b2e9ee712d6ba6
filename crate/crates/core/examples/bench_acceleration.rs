//! Measured wall-clock and FLOP acceleration of exit schedules against the
//! full network, as a CSV table.
//!
//! cargo run --release --example bench_acceleration

use ase::diffusion::NoiseSchedule;
use ase::eval::bench::{bench_acceleration, bench_table};
use ase::net::{Architecture, NetworkConfig, ScoreNetwork};
use ase::sampler::{SamplerConfig, SamplerKind};
use ase::schedule::{make_dn_schedule, ExitSchedule, ScheduleSpec};

fn main() -> ase::Result<()> {
    let arch = Architecture::Stack { blocks: 8 };
    let net = ScoreNetwork::new(NetworkConfig::new(arch, 128, 2), 0)?;
    let schedules = vec![
        ExitSchedule::all_keep(arch, 10),
        make_dn_schedule("D3-DiT")?.scaled_to(arch)?,
        make_dn_schedule("D7-DiT")?.scaled_to(arch)?,
        ScheduleSpec::NoiseEasy { min_blocks: 2 }.resolve(arch, 10)?,
    ];
    let cfg = SamplerConfig::new(SamplerKind::Ddim, 50, 128, 0);
    let rows = bench_acceleration(&net, &schedules, &cfg, &NoiseSchedule::standard(), 3, None)?;
    print!("{}", bench_table(&rows, "example")?.to_csv()?);
    Ok(())
}
