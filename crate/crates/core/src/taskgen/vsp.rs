use rand::seq::index::sample;
use rand::Rng;

use super::{GenError, MAX_ATTEMPTS};
use crate::oracle::bfs_shortest_path;
use crate::seed::split_rng;
use crate::types::{Cell, Level, Payload, SymbolicSolution, TaskInstance, TaskKind, VspPayload};

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 64;
/// Fraction of the non-start, non-goal cells that are holes.
pub const HOLE_DENSITY: f64 = 0.2;

pub fn hole_count(size: usize) -> usize {
    (HOLE_DENSITY * (size * size - 2) as f64).round() as usize
}

/// Start in the top-left quadrant, goal anywhere else, a fixed number of
/// holes; resampled until the goal is reachable.
pub fn gen_vsp(seed: u64, size: usize) -> Result<(TaskInstance, SymbolicSolution), GenError> {
    if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
        return Err(GenError::InvalidLevel(format!("vsp grid size {size}")));
    }
    let mut rng = split_rng(seed, "vsp");
    let quad = size.div_ceil(2).max(1);
    let cells = size * size;
    for _ in 0..MAX_ATTEMPTS {
        let start = Cell::new(rng.random_range(0..quad), rng.random_range(0..quad));
        let mut goal_idx = rng.random_range(0..cells - 1);
        if goal_idx >= start.index(size) {
            goal_idx += 1;
        }
        let goal = Cell::new(goal_idx / size, goal_idx % size);

        let free: Vec<usize> = (0..cells).filter(|&i| i != start.index(size) && i != goal_idx).collect();
        let mut holes = vec![false; cells];
        for k in sample(&mut rng, free.len(), hole_count(size)) {
            holes[free[k]] = true;
        }
        let payload = VspPayload { size, holes, start, goal };
        if let Ok(path) = bfs_shortest_path(&payload, start, goal) {
            let inst = TaskInstance {
                id: TaskInstance::make_id(TaskKind::VspFrozenLake, Level::GridSize(size), seed),
                kind: TaskKind::VspFrozenLake,
                level: Level::GridSize(size),
                seed,
                payload: Payload::Vsp(payload),
            };
            return Ok((inst, SymbolicSolution::Actions(path)));
        }
    }
    Err(GenError::GenerationStuck { kind: TaskKind::VspFrozenLake, seed })
}
