use rand::seq::SliceRandom;

use super::GenError;
use crate::seed::{derive_seed, split_rng};
use crate::types::{JigsawPayload, Level, Payload, SymbolicSolution, TaskInstance, TaskKind};

pub const MAX_SIDE: usize = 4;

/// Uniform non-identity shuffle of a `rows`×`cols` board; the answer maps each
/// board position to the label of the patch that belongs there.
pub fn gen_jigsaw(seed: u64, rows: usize, cols: usize) -> Result<(TaskInstance, SymbolicSolution), GenError> {
    if rows == 0 || cols == 0 || rows > MAX_SIDE || cols > MAX_SIDE || rows * cols < 2 {
        return Err(GenError::InvalidLevel(format!("jigsaw layout {rows}x{cols}")));
    }
    let mut rng = split_rng(seed, "jigsaw");
    let n = rows * cols;
    let mut shuffle: Vec<usize> = (0..n).collect();
    while shuffle.iter().enumerate().all(|(i, &p)| i == p) {
        shuffle.shuffle(&mut rng);
    }
    let payload = JigsawPayload { rows, cols, shuffle, texture_seed: derive_seed(seed, "jigsaw-texture") };
    let answer = payload.labels();
    let level = Level::Layout { rows, cols };
    let inst = TaskInstance {
        id: TaskInstance::make_id(TaskKind::Jigsaw, level, seed),
        kind: TaskKind::Jigsaw,
        level,
        seed,
        payload: Payload::Jigsaw(payload),
    };
    Ok((inst, SymbolicSolution::Permutation(answer)))
}
