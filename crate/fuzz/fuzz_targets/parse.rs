#![no_main]

//! First byte picks a task, the rest fills the canvas pixels (cycled).

use gridflow_core::parse::{parse, parse_strict};
use gridflow_core::render::RenderSpec;
use gridflow_core::taskgen::generate;
use gridflow_core::types::{Level, RasterImage, TaskKind};
use libfuzzer_sys::fuzz_target;

const CASES: [(TaskKind, Level); 5] = [
    (TaskKind::VspFrozenLake, Level::GridSize(3)),
    (TaskKind::Maze, Level::GridSize(8)),
    (TaskKind::Tsp, Level::Cities(12)),
    (TaskKind::Sudoku, Level::Clues(30)),
    (TaskKind::Jigsaw, Level::Layout { rows: 2, cols: 2 }),
];

fuzz_target!(|data: &[u8]| {
    let Some((&pick, pixels)) = data.split_first() else { return };
    if pixels.is_empty() {
        return;
    }
    let (kind, level) = CASES[pick as usize % CASES.len()];
    let (inst, _) = generate(kind, level, 1).expect("fixed instance generates");
    let spec = RenderSpec::default();
    let (w, h) = spec.canvas_for(&inst);
    let raw: Vec<u8> = pixels.iter().copied().cycle().take(w * h * 3).collect();
    let img = RasterImage::from_raw(w, h, raw).expect("sized to the canvas");
    let _ = parse(&img, &inst, &spec);
    let _ = parse_strict(&img, &inst, &spec);
});
