//! End-to-end paths through the library: generate, render, train, sample,
//! evaluate.

use std::collections::HashSet;

use gridflow_core::eval::{evaluate, evaluate_checkpoint, test_items, EvalItem, EvalOptions, Stub, StubSampler};
use gridflow_core::flow::{
    encode_condition, load_training_data, train, CheckpointMeta, DenoiserCheckpoint, ModelConfig, TrainConfig,
};
use gridflow_core::render::RenderSpec;
use gridflow_core::sampler::{euler_sample, SampleConfig};
use gridflow_core::taskgen::{gen_dataset, load_dataset, GenConfig};
use gridflow_core::types::{Level, TaskKind};

fn one_level_per_kind() -> Vec<(TaskKind, Level)> {
    vec![
        (TaskKind::VspFrozenLake, Level::GridSize(4)),
        (TaskKind::Maze, Level::GridSize(8)),
        (TaskKind::Tsp, Level::Cities(12)),
        (TaskKind::Sudoku, Level::Clues(45)),
        (TaskKind::Jigsaw, Level::Layout { rows: 3, cols: 3 }),
    ]
}

#[test]
fn datasets_reload_for_every_kind() {
    let spec = RenderSpec::default();
    for (kind, level) in one_level_per_kind() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig { kind, level, count: 3, base_seed: 11 };
        let records = gen_dataset(&cfg, dir.path(), &spec, 2).unwrap();
        let items = load_dataset(&dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(items.len(), 3);
        for (r, it) in records.iter().zip(&items) {
            assert_eq!(&it.record, r);
            assert_eq!((it.instance.kind, it.instance.level), (kind, level));
        }
    }
}

#[test]
fn stubs_bound_the_pipeline() {
    let spec = RenderSpec::default();
    let items: Vec<EvalItem> = one_level_per_kind()
        .into_iter()
        .flat_map(|(k, l)| test_items(k, l, 4, &spec, &HashSet::new()).unwrap())
        .collect();
    let opts = EvalOptions { jobs: 2, spec, ..Default::default() };
    let oracle = evaluate(&StubSampler { stub: Stub::Oracle, spec }, &items, &opts).unwrap();
    let blank = evaluate(&StubSampler { stub: Stub::Blank, spec }, &items, &opts).unwrap();
    assert_eq!(oracle.rows.len(), 5);
    for r in &oracle.rows {
        assert_eq!((r.accuracy, r.mean_reward, r.parse_error_rate), (1.0, 1.0, 0.0), "{}", r.kind);
    }
    for r in &blank.rows {
        assert_eq!((r.accuracy, r.parse_error_rate), (0.0, 1.0), "{}", r.kind);
    }
}

#[test]
fn short_training_lowers_the_loss_and_checkpoints_reload() {
    let spec = RenderSpec::default();
    let dir = tempfile::tempdir().unwrap();
    let (kind, level) = (TaskKind::VspFrozenLake, Level::GridSize(3));
    gen_dataset(&GenConfig { kind, level, count: 64, base_seed: 1 }, dir.path(), &spec, 1).unwrap();
    let items = load_dataset(&dir.path().join("manifest.jsonl")).unwrap();
    let data = load_training_data(&items).unwrap();
    let meta = CheckpointMeta {
        model: ModelConfig::small(48, 48, 16),
        render: spec,
        train: TrainConfig { steps: 200, lr: 1e-3, mu: -2.0, ..Default::default() },
        kind,
        level,
    };
    let ck_path = dir.path().join("model.dftk");
    let log = dir.path().join("loss.csv");
    let out = train(meta, &data, Some(&ck_path), Some(&log)).unwrap();
    assert_eq!(out.checkpoint.step, 200);

    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 200);
    let (first, last) = (rows[0][2], rows[199][2]);
    assert!(last < first, "smoothed loss {first} -> {last}");

    let loaded = DenoiserCheckpoint::load(&ck_path).unwrap();
    assert_eq!(loaded.id(), out.checkpoint.id());
    let cond = encode_condition(&items[0].input);
    let cfg = SampleConfig { steps: 4, ..Default::default() };
    let a = euler_sample(&out.checkpoint.ema_model().unwrap(), &cond, &cfg).unwrap().0;
    let b = euler_sample(&loaded.ema_model().unwrap(), &cond, &cfg).unwrap().0;
    assert_eq!(a, b);

    let eval_items: Vec<EvalItem> = items.iter().take(4).map(EvalItem::from_dataset).collect();
    let report = evaluate_checkpoint(&loaded, &eval_items, &cfg, &EvalOptions { spec, ..Default::default() }).unwrap();
    assert_eq!(report.rows[0].n, 4);
}
