//! `gridflow` command-line driver: argument definitions and commands.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or config.

pub mod config;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand};
use gridflow_core::eval::{
    ablate_cfg, ablate_steps, data_scale_sweep, evaluate, evaluate_checkpoint, score, test_items, EvalItem,
    EvalOptions, EvalReport, ScaleConfig, Stub, StubSampler,
};
use gridflow_core::flow::{
    encode_condition_checked, load_training_data, train, CheckpointMeta, DenoiserCheckpoint,
};
use gridflow_core::render::{encode_png, render_instance, RenderSpec};
use gridflow_core::sampler::{dump_trajectory, euler_sample, SampleConfig};
use gridflow_core::taskgen::{gen_dataset, generate, load_dataset, payload_hash, DatasetItem, GenConfig};
use gridflow_core::types::{Level, TaskInstance, TaskKind};

use config::RunConfig;

pub const SPEC_NAME: &str = "render_spec.json";

#[derive(Debug, Parser)]
#[command(name = "gridflow", version, about = "Visual reasoning by image generation: datasets, flow-matching training, sampling and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of problem/solution image pairs with a manifest.
    Gen(GenArgs),
    /// Train a denoiser on a dataset.
    Train(TrainArgs),
    /// Sample a solution image for one instance.
    Sample(SampleArgs),
    /// Evaluate a checkpoint on a test set.
    Eval(EvalArgs),
    /// Step, guidance or training-set-size sweeps.
    Ablate(AblateArgs),
    /// Write the per-step clean-sample estimates for one instance as frames
    /// plus a montage.
    Viz(VizArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Train(_) => "train",
            Command::Sample(_) => "sample",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::Viz(_) => "viz",
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration JSON (sections gen, model, train, sample, eval).
    /// Flags override file values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory; the resolved config is written here too.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Jobs {
    /// Worker threads [default: hardware threads].
    #[arg(long, env = "GRIDFLOW_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Task kind: vsp, maze, tsp, sudoku or jigsaw.
    #[arg(long)]
    pub task: Option<String>,
    /// Difficulty level: grid side, city count, clue count, or RxC layout.
    #[arg(long)]
    pub level: Option<String>,
    /// Number of instances [default: 100].
    #[arg(long)]
    pub count: Option<usize>,
    /// First instance seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pixels per grid cell [default: 16].
    #[arg(long)]
    pub cell_px: Option<usize>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory (or its manifest.jsonl).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Logit-normal timestep location.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Logit-normal timestep scale.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    /// Condition-dropout probability.
    #[arg(long)]
    pub p_uncond: Option<f64>,
    /// Save the checkpoint every N steps (0: at the end only).
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Euler steps [default: 20].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Guidance scale w [default: 4].
    #[arg(long)]
    pub cfg: Option<f64>,
    /// Noise seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Checkpoint file.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Instance id, e.g. vsp-3-0000000000000001.
    #[arg(long)]
    pub instance: String,
    #[command(flatten)]
    pub sampling: Sampling,
    /// Also write the per-step clean-sample estimates.
    #[arg(long)]
    pub trajectory: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TestSet {
    /// Test dataset directory; without it a test set is generated from the
    /// reserved seed range.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Task of a generated test set [default: the checkpoint's].
    #[arg(long)]
    pub task: Option<String>,
    /// Level of a generated test set [default: the checkpoint's].
    #[arg(long)]
    pub level: Option<String>,
    /// Size of a generated test set [default: 100].
    #[arg(long)]
    pub count: Option<usize>,
    /// Training dataset whose payloads a generated test set must avoid.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint file.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Pipeline-integrity sampler instead of a checkpoint:
    /// oracle, blank or noisy(p).
    #[arg(long, hide = true)]
    pub stub: Option<String>,
    #[command(flatten)]
    pub test: TestSet,
    #[command(flatten)]
    pub sampling: Sampling,
    /// Candidates per instance, selected by the verifier [default: 1].
    #[arg(long)]
    pub best_of: Option<usize>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Checkpoint file (step and guidance sweeps).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub test: TestSet,
    /// Step-count sweep, e.g. 5,10,20 [default list: 5,10,20,30,40].
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub steps: Option<Vec<usize>>,
    /// Guidance sweep, e.g. 1,4,7 [default list: 1..7].
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub cfg: Option<Vec<f64>>,
    /// Training-set-size sweep, e.g. 64,512,4096.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub data_scale: Option<Vec<usize>>,
    /// Noise seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Checkpoint file.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Instance id, e.g. vsp-3-0000000000000001.
    #[arg(long)]
    pub instance: String,
    #[command(flatten)]
    pub sampling: Sampling,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration (exit 2).
    Usage(String),
    /// The command ran and failed (exit 1).
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let mut root = Cli::command();
            let sub = root.find_subcommand_mut(name).expect("subcommand exists");
            let mut sub = sub.clone().bin_name(format!("gridflow {name}"));
            eprintln!("error: {msg}\n\n{}", sub.render_usage());
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Viz(a) => cmd_viz(a),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(format!("{e:#}"))),
        None => Ok(RunConfig::default()),
    }
}

fn resolve_jobs(j: &Jobs) -> Result<usize, Failure> {
    match j.jobs {
        Some(0) => usage("--jobs must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn parse_task(s: &str) -> Result<TaskKind, Failure> {
    s.parse::<TaskKind>().or_else(|e| usage(e.to_string()))
}

fn parse_level(kind: TaskKind, s: &str) -> Result<Level, Failure> {
    kind.parse_level(s).or_else(|e| usage(e.to_string()))
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.jsonl")
    } else {
        p.to_path_buf()
    }
}

/// The render settings a dataset was written with.
fn dataset_spec(data: &Path) -> anyhow::Result<RenderSpec> {
    let dir = manifest_path(data).parent().map(Path::to_path_buf).unwrap_or_default();
    let p = dir.join(SPEC_NAME);
    if !p.exists() {
        return Ok(RenderSpec::default());
    }
    let text = fs::read_to_string(&p)?;
    serde_json::from_str(&text).with_context(|| format!("{}", p.display()))
}

fn load_items(data: &Path) -> anyhow::Result<Vec<DatasetItem>> {
    let m = manifest_path(data);
    if !m.exists() {
        bail!("no manifest at {}", m.display());
    }
    load_dataset(&m).with_context(|| format!("loading {}", m.display()))
}

fn load_checkpoint(p: &Path) -> anyhow::Result<DenoiserCheckpoint> {
    if !p.exists() {
        bail!("checkpoint not found: {}", p.display());
    }
    DenoiserCheckpoint::load(p).with_context(|| format!("loading checkpoint {}", p.display()))
}

fn write_png(path: &Path, img: &gridflow_core::RasterImage) -> anyhow::Result<()> {
    fs::write(path, encode_png(img)?).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&a.common)?;
    let g = &mut cfg.gen;
    g.task = a.task.or(g.task.take());
    g.level = a.level.or(g.level.take());
    g.count = a.count.unwrap_or(g.count);
    g.seed = a.seed.unwrap_or(g.seed);
    g.cell_px = a.cell_px.unwrap_or(g.cell_px);
    let Some(task) = g.task.as_deref() else { return usage("--task is required") };
    let kind = parse_task(task)?;
    let Some(level) = g.level.as_deref() else { return usage("--level is required") };
    let level = parse_level(kind, level)?;
    if g.count == 0 {
        return usage("--count must be at least 1");
    }
    let spec = RenderSpec::new(g.cell_px).or_else(|e| usage(e.to_string()))?;
    let jobs = resolve_jobs(&a.jobs)?;
    let gen = GenConfig { kind, level, count: g.count, base_seed: g.seed };
    let out = &a.common.out;
    let records = gen_dataset(&gen, out, &spec, jobs).map_err(|e| anyhow!(e)).context("generation failed")?;
    fs::write(out.join(SPEC_NAME), serde_json::to_string_pretty(&spec).map_err(|e| anyhow!(e))? + "\n")
        .map_err(|e| anyhow!(e))?;
    cfg.write_resolved(out)?;
    println!("wrote {} {kind} level-{level} instances to {}", records.len(), out.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&a.common)?;
    let t = &mut cfg.train;
    t.steps = a.steps.unwrap_or(t.steps);
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.seed = a.seed.unwrap_or(t.seed);
    t.mu = a.mu.unwrap_or(t.mu);
    t.sigma = a.sigma.unwrap_or(t.sigma);
    t.ema_decay = a.ema_decay.unwrap_or(t.ema_decay);
    t.p_uncond = a.p_uncond.unwrap_or(t.p_uncond);
    t.checkpoint_every = a.checkpoint_every.unwrap_or(t.checkpoint_every);
    t.validate().or_else(|e| usage(e.to_string()))?;

    let items = load_items(&a.data)?;
    let first = &items[0];
    let (kind, level) = (first.instance.kind, first.instance.level);
    if let Some(other) = items.iter().find(|d| d.instance.kind != kind) {
        return Err(anyhow!("dataset mixes {kind} with {} ({})", other.instance.kind, other.instance.id).into());
    }
    let spec = dataset_spec(&a.data)?;
    let model = cfg.model.resolve(first.target.height(), first.target.width(), spec.cell_px);
    model.validate().or_else(|e| usage(e.to_string()))?;
    let meta = CheckpointMeta { model, render: spec, train: cfg.train, kind, level };
    let data = load_training_data(&items).map_err(|e| anyhow!(e))?;
    let out = &a.common.out;
    fs::create_dir_all(out).map_err(|e| anyhow!(e))?;
    cfg.write_resolved(out)?;
    let ck_path = out.join("model.dftk");
    let outcome = train(meta, &data, Some(&ck_path), Some(&out.join("loss.csv"))).map_err(|e| anyhow!(e))?;
    let tail = &outcome.losses[outcome.losses.len().saturating_sub(50)..];
    let recent = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    println!(
        "trained {} steps on {} samples; recent loss {recent:.5}; checkpoint {} ({})",
        outcome.checkpoint.step,
        data.n,
        ck_path.display(),
        outcome.checkpoint.id()
    );
    Ok(())
}

fn sample_config(base: SampleConfig, s: &Sampling) -> Result<SampleConfig, Failure> {
    let c = SampleConfig {
        steps: s.steps.unwrap_or(base.steps),
        cfg_scale: s.cfg.unwrap_or(base.cfg_scale),
        seed: s.seed.unwrap_or(base.seed),
        record_trajectory: base.record_trajectory,
    };
    c.validate().or_else(|e| usage(e.to_string()))?;
    Ok(c)
}

/// Regenerate the instance named by `id` and check it fits the checkpoint.
fn instance_for(id: &str, ck: &DenoiserCheckpoint) -> Result<EvalItem, Failure> {
    let (kind, level, seed) = TaskInstance::parse_id(id).or_else(|e| usage(e.to_string()))?;
    if kind != ck.meta.kind {
        return Err(anyhow!("instance {id} is {kind}, the checkpoint was trained on {}", ck.meta.kind).into());
    }
    let (instance, truth) = generate(kind, level, seed).map_err(|e| anyhow!(e))?;
    let input = render_instance(&instance, &ck.meta.render);
    Ok(EvalItem { instance, truth, input })
}

fn cmd_sample(a: SampleArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.common)?;
    let mut sc = sample_config(cfg.sample, &a.sampling)?;
    sc.record_trajectory |= a.trajectory;
    let ck = load_checkpoint(&a.checkpoint)?;
    let item = instance_for(&a.instance, &ck)?;
    let model = ck.ema_model().map_err(|e| anyhow!(e))?;
    let cond = encode_condition_checked(&item.input, model.config.height, model.config.width).map_err(|e| anyhow!(e))?;
    let (img, traj) = euler_sample(&model, &cond, &sc).map_err(|e| anyhow!(e))?;
    let out = &a.common.out;
    fs::create_dir_all(out).map_err(|e| anyhow!(e))?;
    let resolved = RunConfig { sample: sc, ..cfg };
    resolved.write_resolved(out)?;
    let png = out.join(format!("{}.png", a.instance));
    write_png(&png, &img)?;
    if let Some(t) = traj {
        dump_trajectory(&t, &out.join(format!("{}_trajectory", a.instance))).map_err(|e| anyhow!(e))?;
    }
    let (o, _) = score(&item, &img, &ck.meta.render);
    let verdict = if o.parse_error {
        "unparseable".to_string()
    } else {
        format!("{} (reward {:.3})", if o.correct { "correct" } else { "incorrect" }, o.reward)
    };
    println!("wrote {}: {verdict}", png.display());
    Ok(())
}

fn test_set(
    t: &TestSet,
    cfg: &RunConfig,
    default: Option<(TaskKind, Level)>,
    spec: &RenderSpec,
) -> Result<Vec<EvalItem>, Failure> {
    if let Some(data) = &t.data {
        let items = load_items(data)?;
        return Ok(items.iter().map(EvalItem::from_dataset).collect());
    }
    let kind = match t.task.as_deref().or(cfg.gen.task.as_deref()) {
        Some(s) => parse_task(s)?,
        None => match default {
            Some((k, _)) => k,
            None => return usage("--task (or --data) is required"),
        },
    };
    let level = match t.level.as_deref().or(cfg.gen.level.as_deref()) {
        Some(s) => parse_level(kind, s)?,
        None => match default {
            Some((k, l)) if k == kind => l,
            _ => return usage("--level (or --data) is required"),
        },
    };
    let count = t.count.unwrap_or(cfg.eval.count);
    if count == 0 {
        return usage("--count must be at least 1");
    }
    let exclude: HashSet<_> = match &t.exclude {
        Some(p) => load_items(p)?.iter().map(|d| payload_hash(&d.instance.payload)).collect(),
        None => HashSet::new(),
    };
    Ok(test_items(kind, level, count, spec, &exclude).map_err(|e| anyhow!(e))?)
}

fn finish_report(report: &EvalReport, out: &Path) -> Result<(), Failure> {
    report.write(out).map_err(|e| anyhow!(e))?;
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&a.common)?;
    cfg.sample = sample_config(cfg.sample, &a.sampling)?;
    cfg.eval.best_of = a.best_of.unwrap_or(cfg.eval.best_of);
    if cfg.eval.best_of == 0 {
        return usage("--best-of must be at least 1");
    }
    let jobs = resolve_jobs(&a.jobs)?;
    let out = &a.common.out;
    let opts = |spec| EvalOptions { seed: cfg.sample.seed, best_of: cfg.eval.best_of, jobs, spec, checkpoint: None };
    match (&a.checkpoint, &a.stub) {
        (Some(_), Some(_)) => usage("--checkpoint and --stub are exclusive"),
        (None, None) => usage("--checkpoint is required"),
        (None, Some(stub)) => {
            let stub: Stub = stub.parse().or_else(|e: String| usage(e))?;
            let spec = match &a.test.data {
                Some(d) => dataset_spec(d)?,
                None => RenderSpec::new(cfg.gen.cell_px).or_else(|e| usage(e.to_string()))?,
            };
            let items = test_set(&a.test, &cfg, None, &spec)?;
            let report = evaluate(&StubSampler { stub, spec }, &items, &opts(spec)).map_err(|e| anyhow!(e))?;
            cfg.write_resolved(out)?;
            finish_report(&report, out)
        }
        (Some(path), None) => {
            let ck = load_checkpoint(path)?;
            let spec = ck.meta.render;
            let items = test_set(&a.test, &cfg, Some((ck.meta.kind, ck.meta.level)), &spec)?;
            let report = evaluate_checkpoint(&ck, &items, &cfg.sample, &opts(spec)).map_err(|e| anyhow!(e))?;
            cfg.write_resolved(out)?;
            finish_report(&report, out)
        }
    }
}

fn cmd_ablate(a: AblateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&a.common)?;
    cfg.sample.seed = a.seed.unwrap_or(cfg.sample.seed);
    let jobs = resolve_jobs(&a.jobs)?;
    let out = &a.common.out;
    let chosen = [a.steps.is_some(), a.cfg.is_some(), a.data_scale.is_some()].iter().filter(|&&b| b).count();
    if chosen != 1 {
        return usage("give exactly one of --steps, --cfg, --data-scale");
    }
    let opts = |spec| EvalOptions { seed: cfg.sample.seed, best_of: cfg.eval.best_of, jobs, spec, checkpoint: None };

    if let Some(sizes) = &a.data_scale {
        if !sizes.is_empty() {
            cfg.eval.sizes = sizes.clone();
        }
        if cfg.eval.sizes.is_empty() || cfg.eval.sizes.contains(&0) {
            return usage("--data-scale sizes must be positive");
        }
        let Some(task) = a.test.task.as_deref().or(cfg.gen.task.as_deref()) else {
            return usage("--task is required for --data-scale");
        };
        let kind = parse_task(task)?;
        let Some(level) = a.test.level.as_deref().or(cfg.gen.level.as_deref()) else {
            return usage("--level is required for --data-scale");
        };
        let level = parse_level(kind, level)?;
        cfg.eval.count = a.test.count.unwrap_or(cfg.eval.count);
        let spec = RenderSpec::new(cfg.gen.cell_px).or_else(|e| usage(e.to_string()))?;
        let (w, h) = spec.canvas(kind, level);
        let model = cfg.model.resolve(h, w, spec.cell_px);
        model.validate().or_else(|e| usage(e.to_string()))?;
        cfg.train.validate().or_else(|e| usage(e.to_string()))?;
        cfg.sample.validate().or_else(|e| usage(e.to_string()))?;
        let scale = ScaleConfig {
            meta: CheckpointMeta { model, render: spec, train: cfg.train, kind, level },
            sizes: cfg.eval.sizes.clone(),
            train_seed_base: cfg.gen.seed,
            test_count: cfg.eval.count,
            sample: cfg.sample,
            eval: opts(spec),
        };
        cfg.write_resolved(out)?;
        let sweep = data_scale_sweep(&scale, out).map_err(|e| anyhow!(e))?;
        sweep.write(&out.join("data_scale.csv")).map_err(|e| anyhow!(e))?;
        print!("{}", sweep.to_table());
        return Ok(());
    }

    let Some(path) = &a.checkpoint else { return usage("--checkpoint is required for --steps and --cfg") };
    let ck = load_checkpoint(path)?;
    let spec = ck.meta.render;
    let items = test_set(&a.test, &cfg, Some((ck.meta.kind, ck.meta.level)), &spec)?;
    if let Some(steps) = &a.steps {
        if !steps.is_empty() {
            cfg.eval.steps_list = steps.clone();
        }
        if cfg.eval.steps_list.contains(&0) {
            return usage("step counts must be at least 1");
        }
        cfg.write_resolved(out)?;
        let sweep = ablate_steps(&ck, &items, &cfg.eval.steps_list, &cfg.sample, &opts(spec)).map_err(|e| anyhow!(e))?;
        sweep.write(&out.join("ablate_steps.csv")).map_err(|e| anyhow!(e))?;
        print!("{}", sweep.to_table());
    } else if let Some(ws) = &a.cfg {
        if !ws.is_empty() {
            cfg.eval.cfg_list = ws.clone();
        }
        if cfg.eval.cfg_list.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return usage("guidance scales must be finite and non-negative");
        }
        cfg.write_resolved(out)?;
        let (sweep, montages) =
            ablate_cfg(&ck, &items, &cfg.eval.cfg_list, &cfg.sample, &opts(spec), Some(&out.join("cfg_montages")))
                .map_err(|e| anyhow!(e))?;
        sweep.write(&out.join("ablate_cfg.csv")).map_err(|e| anyhow!(e))?;
        print!("{}", sweep.to_table());
        println!("wrote {} montages under {}", montages.len(), out.join("cfg_montages").display());
    }
    Ok(())
}

fn cmd_viz(a: VizArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.common)?;
    let mut sc = sample_config(cfg.sample, &a.sampling)?;
    sc.record_trajectory = true;
    let ck = load_checkpoint(&a.checkpoint)?;
    let item = instance_for(&a.instance, &ck)?;
    let model = ck.ema_model().map_err(|e| anyhow!(e))?;
    let cond = encode_condition_checked(&item.input, model.config.height, model.config.width).map_err(|e| anyhow!(e))?;
    let (_, traj) = euler_sample(&model, &cond, &sc).map_err(|e| anyhow!(e))?;
    let out = &a.common.out;
    RunConfig { sample: sc, ..cfg }.write_resolved(out)?;
    let files = dump_trajectory(&traj.expect("recorded"), out).map_err(|e| anyhow!(e))?;
    println!("wrote {} frames and a montage to {}", files.len() - 1, out.display());
    Ok(())
}
