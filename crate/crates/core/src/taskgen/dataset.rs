//! On-disk datasets: `inputs/<id>.png`, `targets/<id>.png`, `manifest.jsonl`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{generate, GenConfig, GenError, MAX_ATTEMPTS};
use crate::manifest::{read_manifest, write_manifest, ManifestError, ManifestRecord};
use crate::render::{decode_png, encode_png, render_instance, render_solution, RenderSpec};
use crate::seed::derive_seed;
use crate::types::{Payload, RasterImage, SymbolicSolution, TaskInstance};

pub fn payload_hash(p: &Payload) -> [u8; 32] {
    let bytes = serde_json::to_vec(p).expect("payloads always serialize");
    Sha256::digest(&bytes).into()
}

fn generate_unique(
    cfg: &GenConfig,
    seed: u64,
    seen: &mut HashSet<[u8; 32]>,
) -> Result<(TaskInstance, SymbolicSolution), GenError> {
    let mut s = seed;
    for k in 1..=MAX_ATTEMPTS {
        let (inst, sol) = generate(cfg.kind, cfg.level, s)?;
        if seen.insert(payload_hash(&inst.payload)) {
            return Ok((inst, sol));
        }
        s = derive_seed(seed, &format!("dedup-{k}"));
    }
    Err(GenError::GenerationStuck { kind: cfg.kind, seed })
}

/// Generate `count` instances from seeds `base_seed..base_seed+count`,
/// replacing payload duplicates with derived seeds, and write images plus the
/// manifest under `out_dir`. Rendering fans out over `jobs` threads; the
/// output is independent of `jobs`.
pub fn gen_dataset(
    cfg: &GenConfig,
    out_dir: &Path,
    spec: &RenderSpec,
    jobs: usize,
) -> Result<Vec<ManifestRecord>, GenError> {
    if cfg.count == 0 {
        return Err(GenError::EmptyCount);
    }
    if !cfg.kind.admits(cfg.level) {
        return Err(GenError::InvalidLevel(format!("{} is not a published {} level", cfg.level, cfg.kind)));
    }
    let mut seen = HashSet::with_capacity(cfg.count);
    let mut items = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count as u64 {
        items.push(generate_unique(cfg, cfg.base_seed.wrapping_add(i), &mut seen)?);
    }

    fs::create_dir_all(out_dir.join("inputs"))?;
    fs::create_dir_all(out_dir.join("targets"))?;
    let jobs = jobs.clamp(1, items.len());
    let chunk = items.len().div_ceil(jobs);
    let results: Vec<Result<Vec<ManifestRecord>, GenError>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|(i, sol)| write_pair(i, sol, out_dir, spec)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("render worker panicked")).collect()
    });
    let mut records = Vec::with_capacity(items.len());
    for r in results {
        records.extend(r?);
    }
    write_manifest(&records, &out_dir.join("manifest.jsonl"))?;
    Ok(records)
}

fn write_pair(inst: &TaskInstance, sol: &SymbolicSolution, out_dir: &Path, spec: &RenderSpec) -> Result<ManifestRecord, GenError> {
    let input = format!("inputs/{}.png", inst.id);
    let target = format!("targets/{}.png", inst.id);
    fs::write(out_dir.join(&input), encode_png(&render_instance(inst, spec))?)?;
    fs::write(out_dir.join(&target), encode_png(&render_solution(inst, sol, spec)?)?)?;
    Ok(ManifestRecord {
        id: inst.id.clone(),
        kind: inst.kind,
        level: inst.level,
        seed: inst.seed,
        input_png_path: input,
        target_png_path: target,
        solution: sol.clone(),
    })
}

/// One manifest row with its regenerated instance and decoded images.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub record: ManifestRecord,
    pub instance: TaskInstance,
    pub input: RasterImage,
    pub target: RasterImage,
}

/// Read a dataset back. Instances are regenerated from `(kind, level, seed)`
/// and must reproduce the recorded id and solution.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<DatasetItem>, GenError> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let records = read_manifest(manifest_path)?;
    records
        .into_iter()
        .map(|record| {
            let (instance, sol) = generate(record.kind, record.level, record.seed)?;
            if instance.id != record.id || sol != record.solution {
                return Err(GenError::Manifest(ManifestError::Parse {
                    line: 0,
                    message: format!("record {} does not match its regenerated instance", record.id),
                }));
            }
            let input = decode_png(&fs::read(dir.join(&record.input_png_path))?)?;
            let target = decode_png(&fs::read(dir.join(&record.target_png_path))?)?;
            Ok(DatasetItem { record, instance, input, target })
        })
        .collect()
}
