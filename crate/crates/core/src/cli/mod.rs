//! Command-line front end: subcommands, exit codes and on-disk outputs.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid config, 3 architecture
//! or schedule mismatch, 4 missing inputs, 5 unknown schedule name.

pub mod checkpoint;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::bench::{bench_acceleration, bench_table};
use crate::eval::experiments::{run_ablation_schedules, run_negative_transfer_suite, run_tradeoff_experiment, Lab};
use crate::eval::report::Table;
use crate::eval::{quality, MetricConfig};
use crate::net::{Architecture, ScoreNetwork};
use crate::sampler::sample_loop;
use crate::schedule::{catalog_entry, predicted_acceleration, ExitSchedule, ScheduleSpec};
use crate::train::{continue_training, finetune_ase, LogRow};
use checkpoint::{decode_samples, encode_samples, load_checkpoint, save_checkpoint, Checkpoint};
use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ARCHITECTURE: i32 = 3;
pub const EXIT_MISSING_INPUT: i32 = 4;
pub const EXIT_UNKNOWN_SCHEDULE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ase", about = "Toy diffusion lab with time-dependent early exit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network from scratch and write a checkpoint.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Early-exit fine-tuning of a checkpoint under an exit schedule.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Catalog name, `all-keep`, `noise-easy:N`, `data-easy:N`, `paper:NAME` or a comma row.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples and write them as a flat f32 matrix.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall-clock and FLOP acceleration of schedules against the full network.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Repeatable; overrides `bench.schedules`.
        #[arg(long)]
        schedule: Vec<String>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Quality metrics of a sample file against a reference file or fresh data.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Run one experiment suite from the config's `experiments` section.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// `tradeoff`, `negative-transfer` or `ablation`.
        #[arg(long)]
        suite: String,
    },
    /// Print a schedule row with its predicted and published acceleration.
    ScheduleInfo {
        /// Schedule name or comma-separated row.
        name: String,
        /// Evaluate the toy-scale row on this config's network.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        Error::Architecture(_) => EXIT_ARCHITECTURE,
        Error::Catalog(_) => EXIT_UNKNOWN_SCHEDULE,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_INPUT,
        Error::Format(_) => EXIT_MISSING_INPUT,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args`, runs the command, prints to `out`/`err`, returns the exit code.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match run(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load_ckpt(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("config has no `{what}` section")))
}

fn resolve_schedule(flag: Option<&str>, cfg: &RunConfig, arch: Architecture) -> Result<Option<ExitSchedule>> {
    let spec = match flag {
        Some(s) => Some(ScheduleSpec::parse(s)?),
        None => cfg.schedule.clone(),
    };
    spec.map(|s| bind(&s, arch, cfg.intervals)).transpose()
}

/// Resolves a parsed spec against a network; a row the network cannot serve
/// is an architecture mismatch rather than a config error.
fn bind(spec: &ScheduleSpec, arch: Architecture, intervals: usize) -> Result<ExitSchedule> {
    spec.resolve(arch, intervals).map_err(|e| match e {
        Error::Config(m) => Error::Architecture(m),
        other => other,
    })
}

fn check_consistent(cfg: &RunConfig, ck: &Checkpoint) -> Result<()> {
    if ck.manifest.network != cfg.network {
        return Err(Error::Architecture("checkpoint network differs from config network".into()));
    }
    if ck.manifest.noise != cfg.noise {
        return Err(Error::Config("checkpoint noise schedule differs from config".into()));
    }
    Ok(())
}

fn log_table(name: &str, digest: &str, log: &[LogRow]) -> Result<Table> {
    let mut t = Table::new(name, digest, &["step", "loss", "lambda_boost_active"]);
    for r in log {
        t.push(vec![r.step.into(), r.loss.into(), r.lambda_boost_active.into()])?;
    }
    Ok(t)
}

fn run(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Pretrain { config, out: path } => {
            let cfg = load_config(&config)?;
            let pc = require(&cfg.pretrain, "pretrain")?;
            let ns = cfg.noise.build()?;
            let digest = cfg.digest();
            let net = ScoreNetwork::new(cfg.network.clone(), cfg.seeds.init)?;
            let run = continue_training(net, pc, &cfg.dataset, &ns, cfg.seeds.train)?;
            let dir = cfg.out_dir();
            let path = path.unwrap_or_else(|| dir.join("pretrain.ckpt"));
            save_checkpoint(&path, &run.network, cfg.noise, &digest, None)?;
            log_table("pretrain_log", &digest, &run.log)?.write(&dir, "pretrain_log")?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Finetune { config, checkpoint, schedule, iterations, out: path } => {
            let cfg = load_config(&config)?;
            let mut fc = require(&cfg.finetune, "finetune")?.clone();
            if let Some(i) = iterations {
                fc.iterations = i;
            }
            let ck = load_ckpt(&checkpoint)?;
            check_consistent(&cfg, &ck)?;
            let arch = ck.network.architecture();
            let sched = resolve_schedule(schedule.as_deref(), &cfg, arch)?
                .ok_or_else(|| Error::Config("finetune needs --schedule or a `schedule` in the config".into()))?;
            sched.check_bound(arch)?;
            let dir = cfg.out_dir();
            let path = path.unwrap_or_else(|| dir.join("finetune.ckpt"));
            if let Some(d) = path.parent() {
                std::fs::create_dir_all(d)?;
            }
            if fc.iterations == 0 {
                // nothing to train: pass the input through untouched
                std::fs::copy(&checkpoint, &path)?;
                writeln!(out, "wrote {} (0 iterations, unchanged)", path.display())?;
                return Ok(());
            }
            let ns = cfg.noise.build()?;
            let digest = cfg.digest();
            let run = finetune_ase(&ck.network, &sched, &cfg.dataset, &fc, &ns, cfg.seeds.train)?;
            save_checkpoint(&path, &run.teacher, cfg.noise, &digest, Some(sched.clone()))?;
            let mut log = log_table("finetune_log", &digest, &run.log)?;
            log.notes.push(format!("schedule {}: {:?}", sched.name, sched.blocks));
            log.notes.push(match run.lambda_reset_step {
                Some(s) => format!("lambda reset to 1 at step {s}"),
                None => "lambda boost active for the whole run".into(),
            });
            log.write(&dir, "finetune_log")?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Sample { config, checkpoint, schedule, out: path } => {
            let cfg = load_config(&config)?;
            let sc = require(&cfg.sampler, "sampler")?;
            let ck = load_ckpt(&checkpoint)?;
            check_consistent(&cfg, &ck)?;
            let sched = resolve_schedule(schedule.as_deref(), &cfg, ck.network.architecture())?;
            let ns = cfg.noise.build()?;
            let (x, stats) = sample_loop(&ck.network, sched.as_ref(), sc, &ns)?;
            let dir = cfg.out_dir();
            let path = path.unwrap_or_else(|| dir.join("samples.f32"));
            if let Some(d) = path.parent() {
                std::fs::create_dir_all(d)?;
            }
            std::fs::write(&path, encode_samples(&x, &cfg.digest()))?;
            writeln!(out, "wrote {} ({} samples, {} FLOPs per sample)", path.display(), x.nrows(), stats.total_flops)?;
        }
        Command::Bench { config, checkpoint, schedule, repeats } => {
            let cfg = load_config(&config)?;
            let sc = require(&cfg.sampler, "sampler")?;
            let ck = load_ckpt(&checkpoint)?;
            check_consistent(&cfg, &ck)?;
            let arch = ck.network.architecture();
            let (specs, rep, with_q) = match &cfg.bench {
                Some(b) => (b.schedules.clone(), b.repeats, b.with_quality),
                None => (vec![ScheduleSpec::AllKeep], 5, false),
            };
            let specs = if schedule.is_empty() {
                specs
            } else {
                schedule.iter().map(|s| ScheduleSpec::parse(s)).collect::<Result<Vec<_>>>()?
            };
            let scheds = specs.iter().map(|s| bind(s, arch, cfg.intervals)).collect::<Result<Vec<_>>>()?;
            let ns = cfg.noise.build()?;
            let mc = MetricConfig { n_samples: sc.batch, ..cfg.metrics.clone() };
            let eval = with_q.then_some((&cfg.dataset, &mc));
            let rows = bench_acceleration(&ck.network, &scheds, sc, &ns, repeats.unwrap_or(rep), eval)?;
            let t = bench_table(&rows, &cfg.digest())?;
            t.write(&cfg.out_dir(), "bench")?;
            write!(out, "{}", t.to_csv()?)?;
        }
        Command::Eval { config, samples, reference } => {
            let cfg = load_config(&config)?;
            let read = |p: &Path| -> Result<ndarray::Array2<f64>> {
                let bytes = std::fs::read(p).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
                Ok(decode_samples(&bytes)?.0)
            };
            let a = read(&samples)?;
            let mut t = Table::new("eval", cfg.digest(), &["samples", "reference", "n", "sliced_wasserstein", "gaussian_frechet", "frechet_ridge"]);
            let (b, ref_name) = match &reference {
                Some(p) => (read(p)?, p.display().to_string()),
                None => {
                    t.notes.push("reference is a fresh draw from the configured dataset".into());
                    (cfg.dataset.sample(a.nrows(), cfg.metrics.reference_seed), "dataset".to_string())
                }
            };
            let q = quality(a.view(), b.view(), &cfg.metrics)?;
            t.push(vec![
                samples.display().to_string().into(),
                ref_name.into(),
                a.nrows().into(),
                q.sliced_wasserstein.into(),
                q.gaussian_frechet.into(),
                q.frechet_ridge.into(),
            ])?;
            t.write(&cfg.out_dir(), "eval")?;
            write!(out, "{}", t.to_csv()?)?;
        }
        Command::Experiment { config, checkpoint, suite } => {
            let cfg = load_config(&config)?;
            let ck = load_ckpt(&checkpoint)?;
            check_consistent(&cfg, &ck)?;
            let ns = cfg.noise.build()?;
            let digest = cfg.digest();
            let lab = Lab { pretrained: &ck.network, data: &cfg.dataset, ns: &ns, metric: &cfg.metrics, config_digest: &digest };
            let ex = &cfg.experiments;
            let table = match suite.as_str() {
                "tradeoff" => run_tradeoff_experiment(&lab, require(&ex.tradeoff, "experiments.tradeoff")?)?,
                "negative-transfer" => run_negative_transfer_suite(&lab, require(&ex.negative_transfer, "experiments.negative_transfer")?)?,
                "ablation" => run_ablation_schedules(&lab, require(&ex.ablation, "experiments.ablation")?)?,
                other => return Err(Error::Config(format!("unknown suite `{other}`"))),
            };
            table.write(&cfg.out_dir(), &table.name)?;
            write!(out, "{}", table.to_csv()?)?;
        }
        Command::ScheduleInfo { name, config } => {
            let toy = match config {
                Some(p) => Some(load_config(&p)?.network.arch),
                None => None,
            };
            schedule_info(&name, toy, out)?;
        }
    }
    Ok(())
}

fn percent(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

/// Default toy network for a published row: 8-block stack, or 4+1+4 u-skip.
fn default_toy(arch: Architecture) -> Architecture {
    match arch {
        Architecture::Stack { .. } => Architecture::Stack { blocks: 8 },
        Architecture::USkip { .. } => Architecture::USkip { encoder: 4, decoder: 4 },
    }
}

/// Prints the row, its predicted acceleration at published and toy scale and,
/// for catalog names, the published wall-clock acceleration.
pub fn schedule_info(name: &str, toy: Option<Architecture>, out: &mut dyn Write) -> Result<()> {
    let spec = ScheduleSpec::parse(name)?;
    let (paper, reported) = match &spec {
        ScheduleSpec::Catalog { name, .. } => {
            let e = catalog_entry(name)?;
            (Some(ExitSchedule::new(e.name, e.arch, e.row.to_vec())?), Some(e.reported_acceleration))
        }
        _ => (None, None),
    };
    let toy_arch = toy.unwrap_or_else(|| default_toy(paper.as_ref().map(|p| p.arch).unwrap_or(Architecture::PAPER_DIT)));
    if let Some(p) = &paper {
        writeln!(out, "schedule: {}", p.name)?;
        writeln!(out, "row: {:?}", p.blocks)?;
        writeln!(out, "predicted acceleration (published network): {}", percent(predicted_acceleration(p, p.arch)?))?;
        if let Some(r) = reported {
            writeln!(out, "published wall-clock acceleration: {}", percent(r))?;
        }
    }
    let toy_sched = match (&spec, &paper) {
        (ScheduleSpec::AllKeep, _) => {
            writeln!(out, "schedule: all-keep")?;
            writeln!(out, "predicted acceleration (published network): {}", percent(0.0))?;
            ExitSchedule::all_keep(toy_arch, crate::schedule::DEFAULT_INTERVALS)
        }
        (ScheduleSpec::Catalog { .. }, Some(p)) => p.scaled_to(toy_arch)?,
        _ => {
            let s = bind(&spec, toy_arch, crate::schedule::DEFAULT_INTERVALS)?;
            writeln!(out, "schedule: {}", s.name)?;
            s
        }
    };
    writeln!(out, "toy network: {toy_arch:?}")?;
    writeln!(out, "toy row: {:?}", toy_sched.blocks)?;
    writeln!(out, "predicted acceleration (toy network): {}", percent(predicted_acceleration(&toy_sched, toy_arch)?))?;
    Ok(())
}
