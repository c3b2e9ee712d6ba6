//! Pretrain a small network on the ring mixture, then fine-tune it for a
//! noise-easy exit schedule and compare sample quality.
//!
//! cargo run --release --example finetune_gmm_ring

use ase::diffusion::NoiseSchedule;
use ase::eval::data::Dataset;
use ase::eval::{quality, MetricConfig};
use ase::net::{Architecture, NetworkConfig};
use ase::sampler::{sample_loop, SamplerConfig, SamplerKind};
use ase::schedule::{predicted_acceleration, ScheduleSpec};
use ase::train::{finetune_ase, pretrain, AdamWConfig, FinetuneConfig, PretrainConfig};

fn main() -> ase::Result<()> {
    let ns = NoiseSchedule::standard();
    let data = Dataset::gmm_ring();
    let arch = Architecture::Stack { blocks: 4 };
    let mut pc = PretrainConfig::new(1500);
    pc.optimizer.cosine = true;
    let base = pretrain(&NetworkConfig::new(arch, 48, 2), &pc, &data, &ns, 0)?;
    println!("pretrained, final loss {:.4}", base.log.last().map_or(f64::NAN, |r| r.loss));

    let mc = MetricConfig { n_samples: 2048, ..MetricConfig::default() };
    let reference = mc.reference(&data);
    let solver = SamplerConfig::new(SamplerKind::Ddim, 25, mc.n_samples, 3);
    let sched = ScheduleSpec::NoiseEasy { min_blocks: 2 }.resolve(arch, 10)?;

    let score = |net: &ase::net::ScoreNetwork, exit| -> ase::Result<f64> {
        let (x, _) = sample_loop(net, exit, &solver, &ns)?;
        Ok(quality(x.view(), reference.view(), &mc)?.sliced_wasserstein)
    };
    println!("full network:             SW {:.4}", score(&base.network, None)?);
    println!("early exit, no finetune:  SW {:.4}", score(&base.network, Some(&sched))?);

    let mut fc = FinetuneConfig::new(1000, 500);
    fc.optimizer = AdamWConfig::with_lr(2e-4);
    let run = finetune_ase(&base.network, &sched, &data, &fc, &ns, 0)?;
    println!("early exit, fine-tuned:   SW {:.4}", score(&run.teacher, Some(&sched))?);
    println!(
        "schedule {:?}, predicted acceleration {:.1}%, lambda reset at step {:?}",
        sched.blocks,
        100.0 * predicted_acceleration(&sched, arch)?,
        run.lambda_reset_step
    );
    Ok(())
}
