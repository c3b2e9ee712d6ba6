//! Acceptance criteria A1–A10, one verdict line each.
//!
//! Runs as a plain binary (`harness = false`). Pass criterion ids such as
//! `A1 A5` after `--` to run a subset. A9 is reported but never fails the run.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ase::cli::checkpoint::{decode_checkpoint, encode_checkpoint};
use ase::cli::config::RunConfig;
use ase::cli::run_with_args;
use ase::diffusion::NoiseSchedule;
use ase::eval::bench::bench_acceleration;
use ase::eval::experiments::{run_negative_transfer_suite, run_tradeoff_experiment, Lab};
use ase::eval::metrics::{gaussian_frechet, sliced_wasserstein};
use ase::eval::report::Table;
use ase::model::GaussianOracle;
use ase::net::{Architecture, NetworkConfig, ScoreNetwork};
use ase::sampler::{sample_loop, SamplerConfig, SamplerKind};
use ase::schedule::{make_dn_schedule, predicted_acceleration, ExitSchedule, CATALOG};
use ase::train::{continue_training, finetune_ase, FinetuneConfig};
use ndarray::{Array2, Axis};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Worst normalized mean and std errors of one oracle run per solver.
fn oracle_errors(seed: u64) -> Vec<(String, f64, f64)> {
    let (mean, std) = (vec![0.5, -1.0], 0.8);
    let ns = NoiseSchedule::standard();
    let oracle = GaussianOracle::new(mean.clone(), std, ns.clone()).unwrap();
    [(SamplerKind::Ddpm, 1000), (SamplerKind::Ddim, 50), (SamplerKind::Em, 1000)]
        .into_iter()
        .map(|(kind, n)| {
            let cfg = SamplerConfig::new(kind, n, 10_000, seed);
            let (x, _) = sample_loop(&oracle, None, &cfg, &ns).unwrap();
            let m = x.mean_axis(Axis(0)).unwrap();
            let s = x.std_axis(Axis(0), 1.0);
            let mean_err = m.iter().zip(&mean).map(|(a, b)| (a - b).abs() / std).fold(0.0, f64::max);
            let std_err = s.iter().map(|v| (v - std).abs() / std).fold(0.0, f64::max);
            (ase::eval::experiments::solver_label(&cfg), mean_err, std_err)
        })
        .collect()
}

fn within(errs: &[(String, f64, f64)]) -> bool {
    errs.iter().all(|(_, m, s)| *m <= 0.02 && *s <= 0.05)
}

fn a1() -> Verdict {
    let start = Instant::now();
    let errs = oracle_errors(0);
    let secs = start.elapsed().as_secs_f64();
    let pass = within(&errs) && secs <= 120.0;
    let parts: Vec<String> = errs.iter().map(|(l, m, s)| format!("{l}: |mean-mu|/s {m:.4}, |std-s|/s {s:.4}")).collect();
    // other seeds are informational only; the verdict is seed 0
    let others = (1..10).filter(|&k| within(&oracle_errors(k))).count();
    verdict(
        pass,
        format!("seed 0: {} ({secs:.1}s; limits 0.02, 0.05, 120s) [seeds 1-9 within limits: {others}/9]", parts.join("; ")),
    )
}

fn a2() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for arch in [Architecture::Stack { blocks: 3 }, Architecture::USkip { encoder: 2, decoder: 2 }] {
        for lv in [false, true] {
            let mut cfg = NetworkConfig::new(arch, 6, 2);
            cfg.time_embed_dim = 4;
            cfg.learned_variance = lv;
            let mut net = ScoreNetwork::new(cfg, 3).unwrap();
            common::scramble(&mut net, 4);
            let full = net.max_depth();
            for depths in [vec![full, full], vec![1, 2, full]] {
                let g = common::grad_check(&net, &depths, 1e-4);
                worst = worst.max(g.max_rel_error);
                checked += g.checked;
            }
        }
    }
    verdict(worst < 1e-4, format!("max relative error {worst:.2e} over {checked} parameter checks (limit 1e-4)"))
}

fn a3() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for e in CATALOG.iter() {
        let s = make_dn_schedule(e.name).unwrap();
        let p = predicted_acceleration(&s, e.arch).unwrap();
        let d = (p - e.reported_acceleration).abs();
        worst = worst.max(d);
        parts.push(format!("{} {:.2}% vs {:.2}%", e.name, 100.0 * p, 100.0 * e.reported_acceleration));
    }
    verdict(worst <= 0.04, format!("max deviation {:.2} pp (limit 4): {}", 100.0 * worst, parts.join(", ")))
}

fn a4() -> Verdict {
    let start = Instant::now();
    let arch = Architecture::Stack { blocks: 8 };
    let mut net = ScoreNetwork::new(NetworkConfig::new(arch, 128, 2), 0).unwrap();
    common::scramble(&mut net, 1);
    let sched = make_dn_schedule("D3-DiT").unwrap().scaled_to(arch).unwrap();
    let cfg = SamplerConfig::new(SamplerKind::Ddim, 50, 256, 0);
    let rows = bench_acceleration(&net, &[sched.clone()], &cfg, &NoiseSchedule::standard(), 7, None).unwrap();
    let r = &rows[0];
    let flop_rel = (r.flop_accel - r.predicted_accel).abs() / r.predicted_accel;
    let wall_pp = (r.measured_accel - r.predicted_accel).abs();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        flop_rel <= 0.02 && wall_pp <= 0.08 && secs <= 120.0,
        format!(
            "row {:?}: predicted {:.2}%, FLOP {:.2}% ({:.2}% rel, limit 2%), wall-clock {:.2}% ({:.2} pp, limit 8) ({secs:.1}s)",
            sched.blocks,
            100.0 * r.predicted_accel,
            100.0 * r.flop_accel,
            100.0 * flop_rel,
            100.0 * r.measured_accel,
            100.0 * wall_pp
        ),
    )
}

/// The gmm_ring config, its pretrained network (round-tripped through the
/// checkpoint format, as the command line would see it) and its digest.
struct Ring {
    cfg: RunConfig,
    net: ScoreNetwork,
    ns: NoiseSchedule,
    digest: String,
    pretrain_s: f64,
}

fn ring() -> Ring {
    let start = Instant::now();
    let cfg = RunConfig::load(&repo_root().join("configs/gmm_ring.json")).unwrap();
    let ns = cfg.noise.build().unwrap();
    let init = ScoreNetwork::new(cfg.network.clone(), cfg.seeds.init).unwrap();
    let run = continue_training(init, cfg.pretrain.as_ref().unwrap(), &cfg.dataset, &ns, cfg.seeds.train).unwrap();
    let digest = cfg.digest();
    let bytes = encode_checkpoint(&run.network, cfg.noise, &digest, None).unwrap();
    let net = decode_checkpoint(&bytes).unwrap().network;
    Ring { cfg, net, ns, digest, pretrain_s: start.elapsed().as_secs_f64() }
}

fn print_table(t: &Table) {
    for line in t.deterministic_csv().unwrap().lines() {
        println!("    {}", line.split_once(',').map_or(line, |(_, rest)| rest));
    }
}

fn a5(r: &Ring) -> Verdict {
    let start = Instant::now();
    let lab = Lab { pretrained: &r.net, data: &r.cfg.dataset, ns: &r.ns, metric: &r.cfg.metrics, config_digest: &r.digest };
    let tc = r.cfg.experiments.tradeoff.as_ref().unwrap();
    let t = run_tradeoff_experiment(&lab, tc).unwrap();
    print_table(&t);
    let mut by_seed: BTreeMap<i64, BTreeMap<String, f64>> = BTreeMap::new();
    for i in 0..t.rows.len() {
        let seed = t.get(i, "seed").unwrap().as_f64().unwrap() as i64;
        let name = t.get(i, "schedule").unwrap().as_str().unwrap().to_string();
        by_seed.entry(seed).or_default().insert(name, t.get(i, "sliced_wasserstein").unwrap().as_f64().unwrap());
    }
    let mut wins = 0;
    let mut parts = Vec::new();
    for (seed, m) in &by_seed {
        let (full, noise, data) = (m["full"], m["noise-easy:2"], m["data-easy:2"]);
        let ok = noise <= 1.15 * full && noise < data;
        wins += ok as usize;
        parts.push(format!("seed {seed}: noise-easy/full {:.3}, noise-easy {noise:.4} vs data-easy {data:.4} {}", noise / full, if ok { "ok" } else { "miss" }));
    }
    let secs = start.elapsed().as_secs_f64() + r.pretrain_s;
    verdict(wins >= 2 && secs <= 900.0, format!("{wins}/3 seeds ({}) ({secs:.0}s incl. pretrain; limit 900s)", parts.join("; ")))
}

fn a6() -> Verdict {
    let mut pass = true;
    for arch in [Architecture::Stack { blocks: 4 }, Architecture::USkip { encoder: 2, decoder: 2 }] {
        let mut net = ScoreNetwork::new(NetworkConfig::new(arch, 16, 2), 0).unwrap();
        common::scramble(&mut net, 2);
        let x = Array2::from_shape_fn((5, 2), |(i, j)| (i as f64 * 0.7 - j as f64).sin());
        let t = [1, 250, 500, 750, 1000];
        pass &= net.forward_early_exit(x.view(), &t, net.max_depth()).unwrap() == net.forward_full(x.view(), &t).unwrap();
        let keep = ExitSchedule::all_keep(arch, 10);
        for kind in [SamplerKind::Ddpm, SamplerKind::Ddim, SamplerKind::Em, SamplerKind::Langevin] {
            let cfg = SamplerConfig::new(kind, 20, 16, 9);
            let (a, _) = sample_loop(&net, None, &cfg, &NoiseSchedule::standard()).unwrap();
            let (b, _) = sample_loop(&net, Some(&keep), &cfg, &NoiseSchedule::standard()).unwrap();
            pass &= a.iter().zip(b.iter()).all(|(u, v)| u.to_bits() == v.to_bits());
        }
    }
    verdict(pass, "full-depth early exit and all-keep sampling (4 solvers, both topologies) are bitwise identical")
}

fn a7() -> Verdict {
    let ns = NoiseSchedule::standard();
    let data = ase::eval::data::Dataset::gaussian(vec![0.5], 0.8);
    let net = ScoreNetwork::new(NetworkConfig::new(Architecture::Stack { blocks: 3 }, 8, 1), 0).unwrap();
    let sched = ExitSchedule::new("ramp", Architecture::Stack { blocks: 3 }, vec![3, 3, 3, 2, 2, 2, 2, 1, 1, 1]).unwrap();
    let c = 7;
    let mut fc = FinetuneConfig::new(2 * c, c);
    fc.batch_size = 16;
    fc.log_every = 1;
    fc.optimizer = ase::train::AdamWConfig::with_lr(1e-3);
    let frozen = finetune_ase(&net, &sched, &data, &FinetuneConfig { ema_rate: 1.0, ..fc.clone() }, &ns, 0).unwrap();
    let tracking = finetune_ase(&net, &sched, &data, &FinetuneConfig { ema_rate: 0.0, ..fc.clone() }, &ns, 0).unwrap();
    let unchanged = frozen.teacher.params() == net.params() && frozen.student.params() != net.params();
    let tracks = tracking.teacher.params() == tracking.student.params();
    let phases = tracking.log.iter().all(|r| r.lambda_boost_active == (r.step < c));
    let reset = tracking.lambda_reset_step == Some(c);
    verdict(
        unchanged && tracks && phases && reset,
        format!(
            "alpha=1 teacher unchanged: {unchanged}; alpha=0 teacher == student: {tracks}; lambda reset at step {:?} (C = {c}), phases {}",
            tracking.lambda_reset_step,
            if phases { "consistent" } else { "inconsistent" }
        ),
    )
}

fn a8() -> Verdict {
    let a = Array2::from_shape_fn((500, 3), |(i, j)| ((i * 13 + j * 7) as f64 * 0.61).sin() * (1.0 + j as f64));
    let sw = sliced_wasserstein(a.view(), a.view(), 64, 0).unwrap();
    let fd = gaussian_frechet(a.view(), a.view()).unwrap().distance;
    let d = ndarray::arr1(&[0.3, -1.2, 2.0]);
    let shifted = gaussian_frechet(a.view(), (&a + &d).view()).unwrap().distance;
    let expect = d.dot(&d);
    verdict(
        sw == 0.0 && fd.abs() <= 1e-8 && (shifted - expect).abs() <= 1e-6,
        format!("SW(A,A) = {sw}, Frechet(A,A) = {fd:.1e}, mean shift {shifted:.9} vs |d|^2 = {expect:.9}"),
    )
}

fn a9(r: &Ring) -> Verdict {
    let start = Instant::now();
    let lab = Lab { pretrained: &r.net, data: &r.cfg.dataset, ns: &r.ns, metric: &r.cfg.metrics, config_digest: &r.digest };
    let t = run_negative_transfer_suite(&lab, r.cfg.experiments.negative_transfer.as_ref().unwrap()).unwrap();
    print_table(&t);
    let mut by_seed: BTreeMap<i64, BTreeMap<String, f64>> = BTreeMap::new();
    for i in 0..t.rows.len() {
        let seed = t.get(i, "seed").unwrap().as_f64().unwrap() as i64;
        let name = t.get(i, "configuration").unwrap().as_str().unwrap().to_string();
        by_seed.entry(seed).or_default().insert(name, t.get(i, "sliced_wasserstein").unwrap().as_f64().unwrap());
    }
    let wins = by_seed.values().filter(|m| m["multi_experts"] < m["further_trained"]).count();
    let parts: Vec<String> = by_seed
        .iter()
        .map(|(s, m)| format!("seed {s}: experts {:.4} vs further {:.4}", m["multi_experts"], m["further_trained"]))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    verdict(wins >= 2 && secs <= 1800.0, format!("{wins}/3 seeds ({}) ({secs:.0}s; limit 1800s)", parts.join("; ")))
}

/// Every file under `dir`, with wall-clock columns removed from tables.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let bytes = std::fs::read(&p).unwrap();
        let bytes = if name.ends_with(".json") && name != "config.json" {
            let t: Table = serde_json::from_slice(&bytes).unwrap();
            t.deterministic_csv().unwrap().into_bytes()
        } else if name.ends_with(".csv") {
            let mut rd = csv::Reader::from_reader(bytes.as_slice());
            let head = rd.headers().unwrap().clone();
            let keep: Vec<usize> = (0..head.len()).filter(|&i| !head[i].starts_with("wall_")).collect();
            let mut lines = vec![keep.iter().map(|&i| head[i].to_string()).collect::<Vec<_>>().join(",")];
            for rec in rd.records() {
                let rec = rec.unwrap();
                lines.push(keep.iter().map(|&i| rec[i].to_string()).collect::<Vec<_>>().join(","));
            }
            lines.join("\n").into_bytes()
        } else {
            bytes
        };
        out.insert(name, bytes);
    }
    out
}

fn a10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut text = std::fs::read_to_string(repo_root().join("configs/quick.json")).unwrap();
    text = text.replacen('{', &format!("{{\n  \"output_dir\": \"{}\",", d.display()), 1);
    let cfg = d.join("config.json");
    std::fs::write(&cfg, text).unwrap();
    let c = cfg.to_str().unwrap();
    let ck = d.join("pretrain.ckpt");
    let ft = d.join("finetune.ckpt");
    let (ck, ft) = (ck.to_str().unwrap(), ft.to_str().unwrap());
    let sf = d.join("samples.f32");
    let sf = sf.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["pretrain", "--config", c],
        vec!["finetune", "--config", c, "--checkpoint", ck],
        vec!["sample", "--config", c, "--checkpoint", ft],
        vec!["eval", "--config", c, "--samples", sf],
        vec!["bench", "--config", c, "--checkpoint", ft],
        vec!["experiment", "--config", c, "--checkpoint", ck, "--suite", "ablation"],
        vec!["schedule-info", "D4-DiT", "--config", c],
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut stdout = Vec::new();
        for args in &commands {
            let mut out = Vec::new();
            let mut err = Vec::new();
            let code = run_with_args(std::iter::once("ase").chain(args.iter().copied()), &mut out, &mut err);
            if code != 0 {
                return verdict(false, format!("`{}` exited {code}: {}", args[0], String::from_utf8_lossy(&err)));
            }
            if !matches!(args[0], "bench" | "experiment") {
                stdout.push(out);
            }
        }
        runs.push((snapshot(d), stdout));
    }
    let same_files = runs[0].0 == runs[1].0;
    let same_stdout = runs[0].1 == runs[1].1;
    verdict(
        same_files && same_stdout,
        format!("{} files from 7 commands identical across reruns (wall_ columns excluded): {}", runs[0].0.len(), same_files && same_stdout),
    )
}

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let on = |id: &str| wanted.is_empty() || wanted.iter().any(|w| w == id);
    let mut failed = Vec::new();
    let mut report = |id: &str, soft: bool, v: Verdict| {
        let tag = match (v.pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft gate, reported only)",
            (false, false) => "FAIL",
        };
        println!("{id} {tag}: {}", v.detail);
        if !v.pass && !soft {
            failed.push(id.to_string());
        }
    };
    let plain: [(&str, fn() -> Verdict); 7] = [("A1", a1), ("A2", a2), ("A3", a3), ("A4", a4), ("A6", a6), ("A7", a7), ("A8", a8)];
    for (id, f) in plain {
        if on(id) {
            report(id, false, f());
        }
    }
    if on("A5") || on("A9") {
        let r = ring();
        if on("A5") {
            report("A5", false, a5(&r));
        }
        if on("A9") {
            report("A9", true, a9(&r));
        }
    }
    if on("A10") {
        report("A10", false, a10());
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
