//! The trade-off and negative-transfer suites at a size that runs in under
//! half a minute. `ase experiment` runs the same code from a config file.
//!
//! cargo run --release --example experiment_suites

use ase::diffusion::NoiseSchedule;
use ase::eval::data::Dataset;
use ase::eval::experiments::{run_negative_transfer_suite, run_tradeoff_experiment, Lab, NegativeTransferConfig, TradeoffConfig};
use ase::eval::MetricConfig;
use ase::net::{Architecture, NetworkConfig};
use ase::sampler::{SamplerConfig, SamplerKind};
use ase::schedule::ScheduleSpec;
use ase::train::{pretrain, AdamWConfig, FinetuneConfig, PretrainConfig};

fn main() -> ase::Result<()> {
    let ns = NoiseSchedule::standard();
    let data = Dataset::gmm_ring();
    let base = pretrain(&NetworkConfig::new(Architecture::Stack { blocks: 4 }, 48, 2), &PretrainConfig::new(1500), &data, &ns, 0)?;
    let metric = MetricConfig { n_samples: 1024, n_proj: 64, ..MetricConfig::default() };
    let lab = Lab { pretrained: &base.network, data: &data, ns: &ns, metric: &metric, config_digest: "example" };
    let solver = SamplerConfig::new(SamplerKind::Ddim, 20, 1024, 0);

    let mut finetune = FinetuneConfig::new(1000, 500);
    finetune.optimizer = AdamWConfig::with_lr(2e-4);
    let tradeoff = TradeoffConfig {
        schedules: vec![ScheduleSpec::NoiseEasy { min_blocks: 2 }, ScheduleSpec::DataEasy { min_blocks: 2 }],
        finetune: finetune.clone(),
        solvers: vec![solver.clone()],
        seeds: vec![0],
        intervals: 10,
    };
    print!("{}", run_tradeoff_experiment(&lab, &tradeoff)?.deterministic_csv()?);

    let transfer = NegativeTransferConfig {
        further_training: PretrainConfig::new(1000),
        expert_training: PretrainConfig::new(100),
        reduced: ScheduleSpec::NoiseEasy { min_blocks: 2 },
        finetune,
        mixed_ks: vec![0, 9],
        solver,
        seeds: vec![0],
        intervals: 10,
    };
    print!("\n{}", run_negative_transfer_suite(&lab, &transfer)?.deterministic_csv()?);
    Ok(())
}
