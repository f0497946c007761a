//! Evaluation harness: sample → parse → verify, aggregated per level, with
//! best-of-N selection and the step, guidance and data-size sweeps.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{
    encode_condition_checked, load_training_data, train, CheckpointMeta, Denoiser, DenoiserCheckpoint, FlowError,
};
use crate::oracle::{ground_truth, verify_with, OracleError};
use crate::parse::parse_strict;
use crate::render::{encode_png, render_instance, render_solution, RenderSpec};
use crate::sampler::{euler_sample, euler_sample_latent, SampleConfig, SampleError};
use crate::seed::split_rng;
use crate::taskgen::{gen_dataset, generate, load_dataset, payload_hash, DatasetItem, GenConfig, GenError};
use crate::types::{Level, Move, Payload, RasterImage, SymbolicSolution, TaskInstance, TaskKind};

/// Test instances draw seeds from here up; training ranges stay below.
pub const TEST_SEED_BASE: u64 = 1 << 40;
/// Default test-set size per level.
pub const TEST_COUNT: usize = 100;
pub const BEST_OF_GRID: [usize; 4] = [1, 2, 4, 8];
pub const STEPS_SWEEP: [usize; 5] = [5, 10, 20, 30, 40];
pub const CFG_SWEEP: [f64; 7] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
/// Instances per first-step montage in the guidance sweep.
const MONTAGE_ITEMS: usize = 8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("instance {id} is {got}, the checkpoint was trained on {expected}")]
    KindMismatch { id: String, expected: TaskKind, got: TaskKind },
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("instance {id}: {message}")]
    Oracle { id: String, message: String },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("png: {0}")]
    Codec(String),
}

/// One test case: the instance, its oracle answer and the problem image.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub instance: TaskInstance,
    pub truth: SymbolicSolution,
    pub input: RasterImage,
}

impl EvalItem {
    pub fn from_dataset(d: &DatasetItem) -> Self {
        EvalItem { instance: d.instance.clone(), truth: d.record.solution.clone(), input: d.input.clone() }
    }

    pub fn new(instance: TaskInstance, spec: &RenderSpec) -> Result<Self, EvalError> {
        let truth = ground_truth(&instance)
            .map_err(|e: OracleError| EvalError::Oracle { id: instance.id.clone(), message: e.to_string() })?;
        let input = render_instance(&instance, spec);
        Ok(EvalItem { instance, truth, input })
    }
}

/// `count` instances from seeds `TEST_SEED_BASE..`, skipping payloads that
/// repeat within the set or appear in `exclude`.
pub fn test_items(
    kind: TaskKind,
    level: Level,
    count: usize,
    spec: &RenderSpec,
    exclude: &HashSet<[u8; 32]>,
) -> Result<Vec<EvalItem>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut seed = TEST_SEED_BASE;
    let limit = TEST_SEED_BASE + 100 * count as u64 + 10_000;
    while out.len() < count {
        if seed >= limit {
            return Err(EvalError::Config(format!("could not find {count} unseen {kind} {level} instances")));
        }
        let (inst, _) = generate(kind, level, seed)?;
        seed += 1;
        let h = payload_hash(&inst.payload);
        if exclude.contains(&h) || !seen.insert(h) {
            continue;
        }
        out.push(EvalItem::new(inst, spec)?);
    }
    Ok(out)
}

/// Drop items whose payload occurs in `train`.
pub fn unseen(items: Vec<EvalItem>, train: &[DatasetItem]) -> Vec<EvalItem> {
    let known: HashSet<_> = train.iter().map(|d| payload_hash(&d.instance.payload)).collect();
    items.into_iter().filter(|it| !known.contains(&payload_hash(&it.instance.payload))).collect()
}

/// What the report echoes about a sampler.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerInfo {
    pub name: String,
    pub steps: Option<usize>,
    pub cfg_scale: Option<f64>,
}

/// Produces candidate solution images.
pub trait CandidateSampler: Sync {
    fn draw(&self, item: &EvalItem, seed: u64) -> Result<RasterImage, String>;
    fn info(&self) -> SamplerInfo;
}

pub struct ModelSampler<'a> {
    pub model: &'a Denoiser<f32>,
    pub config: SampleConfig,
}

impl CandidateSampler for ModelSampler<'_> {
    fn draw(&self, item: &EvalItem, seed: u64) -> Result<RasterImage, String> {
        let mc = &self.model.config;
        let cond = encode_condition_checked(&item.input, mc.height, mc.width).map_err(|e| e.to_string())?;
        let cfg = SampleConfig { seed, record_trajectory: false, ..self.config };
        euler_sample(self.model, &cond, &cfg).map(|(img, _)| img).map_err(|e| e.to_string())
    }

    fn info(&self) -> SamplerInfo {
        SamplerInfo { name: "model".into(), steps: Some(self.config.steps), cfg_scale: Some(self.config.cfg_scale) }
    }
}

/// Pipeline-integrity samplers that bypass the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stub {
    /// The rendered ground truth.
    Oracle,
    /// A background-colored canvas.
    Blank,
    /// Oracle with probability p per draw, else blank.
    Noisy(f64),
}

impl FromStr for Stub {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(Stub::Oracle),
            "blank" => Ok(Stub::Blank),
            _ => {
                let p = s
                    .strip_prefix("noisy(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| format!("unknown stub {s:?}; expected oracle, blank or noisy(p)"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("noisy stub probability {p} outside [0, 1]"));
                }
                Ok(Stub::Noisy(p))
            }
        }
    }
}

impl fmt::Display for Stub {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stub::Oracle => f.write_str("oracle"),
            Stub::Blank => f.write_str("blank"),
            Stub::Noisy(p) => write!(f, "noisy({p})"),
        }
    }
}

pub struct StubSampler {
    pub stub: Stub,
    pub spec: RenderSpec,
}

impl StubSampler {
    fn oracle(&self, item: &EvalItem) -> Result<RasterImage, String> {
        render_solution(&item.instance, &item.truth, &self.spec).map_err(|e| e.to_string())
    }

    fn blank(&self, item: &EvalItem) -> RasterImage {
        let (w, h) = self.spec.canvas_for(&item.instance);
        RasterImage::filled(w, h, self.spec.palette.background)
    }
}

impl CandidateSampler for StubSampler {
    fn draw(&self, item: &EvalItem, seed: u64) -> Result<RasterImage, String> {
        match self.stub {
            Stub::Oracle => self.oracle(item),
            Stub::Blank => Ok(self.blank(item)),
            Stub::Noisy(p) => {
                // Independent per (seed, instance).
                let u: f64 = split_rng(seed, &format!("noisy/{}", item.instance.id)).random();
                if u < p {
                    self.oracle(item)
                } else {
                    Ok(self.blank(item))
                }
            }
        }
    }

    fn info(&self) -> SamplerInfo {
        SamplerInfo { name: format!("stub:{}", self.stub), steps: None, cfg_scale: None }
    }
}

/// Result of judging one candidate image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub correct: bool,
    pub reward: f64,
    /// No answer could be read: parsing failed, or the draw itself failed.
    pub parse_error: bool,
}

const UNREADABLE: Outcome = Outcome { correct: false, reward: 0.0, parse_error: true };

/// Parse an image and verify the answer against the item's ground truth.
pub fn score(item: &EvalItem, img: &RasterImage, spec: &RenderSpec) -> (Outcome, Option<SymbolicSolution>) {
    match parse_strict(img, &item.instance, spec) {
        Err(_) => (UNREADABLE, None),
        Ok(sol) => match verify_with(&item.instance, &sol, &item.truth) {
            Ok(v) => (Outcome { correct: v.correct, reward: v.partial_reward, parse_error: false }, Some(sol)),
            Err(_) => (Outcome { correct: false, reward: 0.0, parse_error: false }, Some(sol)),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestOfN {
    /// The selected candidate's parsed answer, if any candidate parsed.
    pub solution: Option<SymbolicSolution>,
    /// The selected candidate's outcome; `correct == false` flags failure.
    pub outcome: Outcome,
    pub candidates_used: usize,
}

/// Draw up to `n` candidates with seeds `seed..seed+n` and return the first
/// one the verifier accepts, else the one with the highest partial reward.
pub fn best_of_n<S: CandidateSampler + ?Sized>(
    sampler: &S,
    item: &EvalItem,
    n: usize,
    seed: u64,
    spec: &RenderSpec,
) -> Result<BestOfN, EvalError> {
    if n == 0 {
        return Err(EvalError::Config("best-of-N needs N ≥ 1".into()));
    }
    let mut best = BestOfN { solution: None, outcome: UNREADABLE, candidates_used: 0 };
    for k in 0..n {
        let (outcome, sol) = match sampler.draw(item, seed.wrapping_add(k as u64)) {
            Ok(img) => score(item, &img, spec),
            Err(_) => (UNREADABLE, None),
        };
        let better = k == 0 || outcome.reward > best.outcome.reward || (best.outcome.parse_error && !outcome.parse_error);
        if outcome.correct || better {
            best = BestOfN { solution: sol, outcome, candidates_used: k + 1 };
        }
        if outcome.correct {
            return Ok(best);
        }
    }
    best.candidates_used = n;
    Ok(best)
}

/// One aggregated row; `wall_ms` is the mean per instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub kind: TaskKind,
    #[serde(serialize_with = "ser_display")]
    pub level: Level,
    pub n: usize,
    pub accuracy: f64,
    pub mean_reward: f64,
    pub parse_error_rate: f64,
    pub wall_ms: f64,
}

fn ser_display<S: serde::Serializer, T: fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl EvalRow {
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.3}",
            self.kind.slug(),
            self.level,
            self.n,
            self.accuracy,
            self.mean_reward,
            self.parse_error_rate,
            self.wall_ms
        )
    }
}

pub const CSV_HEADER: &str = "kind,level,n,accuracy,mean_reward,parse_error_rate,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub sampler: SamplerInfo,
    pub checkpoint: Option<String>,
    pub seed: u64,
    pub best_of: usize,
    pub verifier: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub echo: ConfigEcho,
    pub rows: Vec<EvalRow>,
    /// Per-instance outcomes in input order.
    #[serde(skip)]
    pub outcomes: Vec<Outcome>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.csv_fields());
            s.push('\n');
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let e = &self.echo;
        let fmt_opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "sampler={} T={} w={} checkpoint={} seed={} best_of={} verifier={}",
            e.sampler.name,
            fmt_opt(e.sampler.steps.map(|v| v.to_string())),
            fmt_opt(e.sampler.cfg_scale.map(|v| v.to_string())),
            e.checkpoint.as_deref().unwrap_or("-"),
            e.seed,
            e.best_of,
            e.verifier
        );
        s.push_str(&table_header(None));
        for r in &self.rows {
            s.push_str(&table_line(None, r));
        }
        s
    }

    /// `report.csv` and `report.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.to_csv())?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(dir.join("report.json"), json + "\n")?;
        Ok(())
    }

    /// Accuracy over all instances.
    pub fn accuracy(&self) -> f64 {
        self.outcomes.iter().filter(|o| o.correct).count() as f64 / self.outcomes.len().max(1) as f64
    }
}

fn table_header(param: Option<&str>) -> String {
    let p = param.map(|p| format!("{p:>9} ")).unwrap_or_default();
    format!("{p}{:<7} {:>6} {:>5} {:>9} {:>12} {:>11} {:>10}\n", "kind", "level", "n", "accuracy", "mean_reward", "parse_err", "wall_ms")
}

fn table_line(value: Option<f64>, r: &EvalRow) -> String {
    let p = value.map(|v| format!("{v:>9} ")).unwrap_or_default();
    format!(
        "{p}{:<7} {:>6} {:>5} {:>9.3} {:>12.3} {:>11.3} {:>10.1}\n",
        r.kind.slug(),
        r.level.to_string(),
        r.n,
        r.accuracy,
        r.mean_reward,
        r.parse_error_rate,
        r.wall_ms
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Base sampling seed; candidate k of every instance uses `seed + k`.
    pub seed: u64,
    pub best_of: usize,
    pub jobs: usize,
    pub spec: RenderSpec,
    pub checkpoint: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { seed: 0, best_of: 1, jobs: 1, spec: RenderSpec::default(), checkpoint: None }
    }
}

/// Evaluate every item and aggregate per (kind, level), in order of first
/// appearance. Items are split across `jobs` threads; results do not depend
/// on `jobs`.
pub fn evaluate<S: CandidateSampler + ?Sized>(
    sampler: &S,
    items: &[EvalItem],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    let jobs = opts.jobs.clamp(1, items.len());
    let chunk = items.len().div_ceil(jobs);
    let results: Vec<Result<(Outcome, f64), EvalError>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|item| {
                            let t0 = Instant::now();
                            let b = best_of_n(sampler, item, opts.best_of, opts.seed, &opts.spec)?;
                            Ok((b.outcome, t0.elapsed().as_secs_f64() * 1e3))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut groups: Vec<((TaskKind, Level), Vec<usize>)> = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let key = (item.instance.kind, item.instance.level);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let rows = groups
        .into_iter()
        .map(|((kind, level), idx)| {
            let n = idx.len();
            let mean = |f: &dyn Fn(&(Outcome, f64)) -> f64| idx.iter().map(|&i| f(&results[i])).sum::<f64>() / n as f64;
            EvalRow {
                kind,
                level,
                n,
                accuracy: idx.iter().filter(|&&i| results[i].0.correct).count() as f64 / n as f64,
                mean_reward: mean(&|r| r.0.reward),
                parse_error_rate: mean(&|r| r.0.parse_error as u8 as f64),
                wall_ms: mean(&|r| r.1),
            }
        })
        .collect();
    Ok(EvalReport {
        echo: ConfigEcho {
            sampler: sampler.info(),
            checkpoint: opts.checkpoint.clone(),
            seed: opts.seed,
            best_of: opts.best_of,
            verifier: "oracle",
        },
        rows,
        outcomes: results.into_iter().map(|r| r.0).collect(),
    })
}

fn check_kind(ck: &DenoiserCheckpoint, items: &[EvalItem]) -> Result<(), EvalError> {
    match items.iter().find(|it| it.instance.kind != ck.meta.kind) {
        Some(it) => Err(EvalError::KindMismatch { id: it.instance.id.clone(), expected: ck.meta.kind, got: it.instance.kind }),
        None => Ok(()),
    }
}

/// [`evaluate`] with the checkpoint's averaged weights.
pub fn evaluate_checkpoint(
    ck: &DenoiserCheckpoint,
    items: &[EvalItem],
    sample: &SampleConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    check_kind(ck, items)?;
    sample.validate()?;
    let model = ck.ema_model()?;
    let sampler = ModelSampler { model: &model, config: *sample };
    let opts = EvalOptions { checkpoint: Some(ck.id()), ..opts.clone() };
    evaluate(&sampler, items, &opts)
}

/// One table row per swept value and level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub row: EvalRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    /// Column name of the swept value: `steps`, `cfg_scale` or `train_size`.
    pub param: &'static str,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{CSV_HEADER}\n", self.param);
        for r in &self.rows {
            let _ = writeln!(s, "{},{}", r.value, r.row.csv_fields());
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = table_header(Some(self.param));
        for r in &self.rows {
            s.push_str(&table_line(Some(r.value), &r.row));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn sweep_rows(value: f64, report: EvalReport) -> impl Iterator<Item = SweepRow> {
    report.rows.into_iter().map(move |row| SweepRow { value, row })
}

/// Evaluate once per step count.
pub fn ablate_steps(
    ck: &DenoiserCheckpoint,
    items: &[EvalItem],
    steps_list: &[usize],
    base: &SampleConfig,
    opts: &EvalOptions,
) -> Result<Sweep, EvalError> {
    if steps_list.is_empty() {
        return Err(EvalError::Config("empty steps list".into()));
    }
    let mut rows = Vec::new();
    for &steps in steps_list {
        let report = evaluate_checkpoint(ck, items, &SampleConfig { steps, ..*base }, opts)?;
        rows.extend(sweep_rows(steps as f64, report));
    }
    Ok(Sweep { param: "steps", rows })
}

/// Evaluate once per guidance scale. With `montage_dir`, also write one
/// `cfg_w<w>.png` per scale: the first-step x̂₀ of the first few instances,
/// side by side.
pub fn ablate_cfg(
    ck: &DenoiserCheckpoint,
    items: &[EvalItem],
    w_list: &[f64],
    base: &SampleConfig,
    opts: &EvalOptions,
    montage_dir: Option<&Path>,
) -> Result<(Sweep, Vec<PathBuf>), EvalError> {
    if w_list.is_empty() {
        return Err(EvalError::Config("empty guidance list".into()));
    }
    let mut rows = Vec::new();
    let mut montages = Vec::new();
    let model = ck.ema_model()?;
    for &w in w_list {
        let cfg = SampleConfig { cfg_scale: w, ..*base };
        let report = evaluate_checkpoint(ck, items, &cfg, opts)?;
        rows.extend(sweep_rows(w, report));
        if let Some(dir) = montage_dir {
            let frames = items
                .iter()
                .take(MONTAGE_ITEMS)
                .map(|it| first_step_x0(&model, it, &cfg, opts.seed))
                .collect::<Result<Vec<_>, _>>()?;
            let montage = RasterImage::hstack(&frames).expect("frames share a height");
            fs::create_dir_all(dir)?;
            let p = dir.join(format!("cfg_w{w}.png"));
            fs::write(&p, encode_png(&montage).map_err(|e| EvalError::Codec(e.to_string()))?)?;
            montages.push(p);
        }
    }
    Ok((Sweep { param: "cfg_scale", rows }, montages))
}

/// The clean-sample estimate after the first guided evaluation (t = 0).
/// It depends only on the noise and the guided velocity there, so one Euler
/// step suffices.
pub fn first_step_x0(
    model: &Denoiser<f32>,
    item: &EvalItem,
    cfg: &SampleConfig,
    seed: u64,
) -> Result<RasterImage, EvalError> {
    let cond = encode_condition_checked(&item.input, model.config.height, model.config.width)?;
    let one = SampleConfig { steps: 1, seed, record_trajectory: true, ..*cfg };
    let (_, traj) = euler_sample_latent(model, &cond, &one)?;
    Ok(traj.expect("recorded").snapshots[0].image())
}

/// Inputs for [`data_scale_sweep`].
#[derive(Debug, Clone)]
pub struct ScaleConfig {
    pub meta: CheckpointMeta,
    pub sizes: Vec<usize>,
    pub train_seed_base: u64,
    pub test_count: usize,
    pub sample: SampleConfig,
    pub eval: EvalOptions,
}

/// For each training-set size: generate, train with the fixed budget in
/// `meta.train`, and evaluate on one held-out set. Training sets use seeds
/// from `train_seed_base`; the test set uses the reserved range and skips
/// any payload seen in the largest training set.
pub fn data_scale_sweep(cfg: &ScaleConfig, out_dir: &Path) -> Result<Sweep, EvalError> {
    let (kind, level) = (cfg.meta.kind, cfg.meta.level);
    let largest = *cfg.sizes.iter().max().ok_or_else(|| EvalError::Config("empty size list".into()))?;
    if cfg.sizes.contains(&0) {
        return Err(EvalError::Config("training-set sizes must be positive".into()));
    }
    if cfg.train_seed_base.saturating_add(largest as u64) > TEST_SEED_BASE {
        return Err(EvalError::Config("training seeds would overlap the test range".into()));
    }
    let spec = &cfg.meta.render;
    let mut train_sets = Vec::new();
    for &size in &cfg.sizes {
        let dir = out_dir.join(format!("train_{size}"));
        let gen = GenConfig { kind, level, count: size, base_seed: cfg.train_seed_base };
        gen_dataset(&gen, &dir, spec, cfg.eval.jobs)?;
        train_sets.push((size, dir));
    }
    let (_, largest_dir) = train_sets.iter().find(|(s, _)| *s == largest).expect("largest size present");
    let seen: HashSet<_> = load_dataset(&largest_dir.join("manifest.jsonl"))?
        .iter()
        .map(|d| payload_hash(&d.instance.payload))
        .collect();
    let test = test_items(kind, level, cfg.test_count, spec, &seen)?;

    let mut rows = Vec::new();
    for (size, dir) in &train_sets {
        let data = load_training_data(&load_dataset(&dir.join("manifest.jsonl"))?)?;
        let out = train(cfg.meta.clone(), &data, Some(&dir.join("model.dftk")), Some(&dir.join("loss.csv")))?;
        let report = evaluate_checkpoint(&out.checkpoint, &test, &cfg.sample, &cfg.eval)?;
        rows.extend(sweep_rows(*size as f64, report));
    }
    Ok(Sweep { param: "train_size", rows })
}

fn walk_moves(payload: &Payload, cell: crate::types::Cell) -> Vec<Move> {
    match payload {
        Payload::Vsp(p) => Move::ALL.into_iter().filter(|&m| cell.step(m, p.size).is_some()).collect(),
        Payload::Maze(p) => Move::ALL.into_iter().filter(|&m| p.open(cell, m) && cell.step(m, p.size).is_some()).collect(),
        _ => Vec::new(),
    }
}

fn walk_endpoints(item: &EvalItem) -> Result<(crate::types::Cell, usize), EvalError> {
    let start = match &item.instance.payload {
        Payload::Vsp(p) => p.start,
        Payload::Maze(p) => p.start,
        _ => return Err(EvalError::Config(format!("random walks need a grid task, got {}", item.instance.kind))),
    };
    let len = match &item.truth {
        SymbolicSolution::Actions(a) => a.len(),
        _ => return Err(EvalError::Config("grid task without an action answer".into())),
    };
    Ok((start, len))
}

/// Monte Carlo accuracy of guessing: per instance, `walks` walks of the
/// ground-truth length, each step uniform over the moves that stay on the
/// grid (and, in mazes, do not cross a wall), scored by the verifier.
pub fn random_walk_baseline(items: &[EvalItem], walks: usize, seed: u64) -> Result<f64, EvalError> {
    if items.is_empty() || walks == 0 {
        return Err(EvalError::Empty);
    }
    let mut hits = 0usize;
    for item in items {
        let (start, len) = walk_endpoints(item)?;
        let mut rng = split_rng(seed, &format!("walk/{}", item.instance.id));
        for _ in 0..walks {
            let mut cell = start;
            let mut moves = Vec::with_capacity(len);
            for _ in 0..len {
                let opts = walk_moves(&item.instance.payload, cell);
                let m = opts[rng.random_range(0..opts.len())];
                cell = cell.step(m, grid_side(&item.instance.payload)).expect("move stays on the grid");
                moves.push(m);
            }
            let v = verify_with(&item.instance, &SymbolicSolution::Actions(moves), &item.truth)
                .map_err(|e| EvalError::Oracle { id: item.instance.id.clone(), message: e.to_string() })?;
            hits += v.correct as usize;
        }
    }
    Ok(hits as f64 / (items.len() * walks) as f64)
}

fn grid_side(p: &Payload) -> usize {
    match p {
        Payload::Vsp(v) => v.size,
        Payload::Maze(m) => m.size,
        _ => 0,
    }
}

/// Exact success probability of the walks in [`random_walk_baseline`] for
/// one instance, by propagating probability mass over cells.
pub fn random_walk_exact(item: &EvalItem) -> Result<f64, EvalError> {
    let (start, len) = walk_endpoints(item)?;
    let p = &item.instance.payload;
    let n = grid_side(p);
    let (goal, hole): (_, Box<dyn Fn(crate::types::Cell) -> bool>) = match p {
        Payload::Vsp(v) => (v.goal, Box::new(|c| v.is_hole(c))),
        Payload::Maze(m) => (m.goal, Box::new(|_| false)),
        _ => unreachable!("checked by walk_endpoints"),
    };
    let mut mass = vec![0.0f64; n * n];
    mass[start.index(n)] = 1.0;
    for _ in 0..len {
        let mut next = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let cell = crate::types::Cell::new(r, c);
                let m = mass[cell.index(n)];
                if m == 0.0 {
                    continue;
                }
                let opts = walk_moves(p, cell);
                for mv in &opts {
                    let to = cell.step(*mv, n).expect("on grid");
                    if !hole(to) {
                        next[to.index(n)] += m / opts.len() as f64;
                    }
                }
            }
        }
        mass = next;
    }
    Ok(mass[goal.index(n)])
}
