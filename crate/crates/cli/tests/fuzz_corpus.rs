//! Replays the checked-in fuzz corpus through the same entry points the
//! fuzz targets exercise, so seed regressions show up in `cargo test`.

use std::fs;
use std::path::PathBuf;

use gridflow_cli::config::RunConfig;
use gridflow_core::flow::DenoiserCheckpoint;
use gridflow_core::manifest::{from_jsonl, to_jsonl};
use gridflow_core::parse::parse;
use gridflow_core::render::{decode_png, encode_png, RenderSpec};
use gridflow_core::taskgen::generate;
use gridflow_core::types::{Level, RasterImage, TaskKind};

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn manifest_seeds_parse_and_round_trip() {
    for (p, bytes) in corpus("manifest") {
        if p.file_stem().is_some_and(|s| s == "empty") {
            assert!(from_jsonl(std::str::from_utf8(&bytes).unwrap()).is_err(), "empty manifests are rejected");
            continue;
        }
        let records = from_jsonl(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(from_jsonl(&to_jsonl(&records).unwrap()).unwrap(), records);
    }
}

#[test]
fn png_seeds_decode_and_round_trip() {
    for (p, bytes) in corpus("png") {
        let img = decode_png(&bytes).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(decode_png(&encode_png(&img).unwrap()).unwrap(), img);
    }
}

#[test]
fn checkpoint_seeds_load() {
    for (p, bytes) in corpus("checkpoint") {
        let ck = DenoiserCheckpoint::from_bytes(&bytes).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        ck.ema_model().unwrap();
        assert_eq!(DenoiserCheckpoint::from_bytes(&ck.to_bytes()).unwrap().id(), ck.id());
    }
}

#[test]
fn truncated_checkpoints_are_rejected() {
    for (_, bytes) in corpus("checkpoint") {
        for cut in [0, 4, 16, bytes.len() / 2, bytes.len() - 1] {
            assert!(DenoiserCheckpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }
}

#[test]
fn parse_seeds_read_back_the_answer() {
    let cases = [
        (TaskKind::VspFrozenLake, Level::GridSize(3)),
        (TaskKind::Maze, Level::GridSize(8)),
        (TaskKind::Tsp, Level::Cities(12)),
        (TaskKind::Sudoku, Level::Clues(30)),
        (TaskKind::Jigsaw, Level::Layout { rows: 2, cols: 2 }),
    ];
    let spec = RenderSpec::default();
    for (p, bytes) in corpus("parse") {
        let (pick, pixels) = bytes.split_first().unwrap();
        let (kind, level) = cases[*pick as usize % cases.len()];
        let (inst, truth) = generate(kind, level, 1).unwrap();
        let (w, h) = spec.canvas_for(&inst);
        let raw: Vec<u8> = pixels.iter().copied().cycle().take(w * h * 3).collect();
        let img = RasterImage::from_raw(w, h, raw).unwrap();
        let got = parse(&img, &inst, &spec);
        // Full-size seeds are rendered answers; short ones are filler.
        if pixels.len() == w * h * 3 {
            assert_eq!(got.unwrap(), truth, "{}", p.display());
        }
    }
}

#[test]
fn run_config_seeds_load() {
    for (p, bytes) in corpus("run_config") {
        let cfg = RunConfig::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.train.validate().unwrap();
        cfg.sample.validate().unwrap();
    }
}
