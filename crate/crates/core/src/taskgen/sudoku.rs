use rand::seq::SliceRandom;

use super::{GenError, MAX_ATTEMPTS};
use crate::oracle::{count_solutions, random_full_grid};
use crate::seed::split_rng;
use crate::types::{Level, Payload, SudokuPayload, SymbolicSolution, TaskInstance, TaskKind};

pub const MIN_CLUES: usize = 17;
pub const MAX_CLUES: usize = 80;

/// Remove cells from a random full grid while the solution stays unique,
/// stopping at exactly `clues` givens; restart from a fresh grid if the
/// removal order dead-ends above the target.
pub fn gen_sudoku(seed: u64, clues: usize) -> Result<(TaskInstance, SymbolicSolution), GenError> {
    if !(MIN_CLUES..=MAX_CLUES).contains(&clues) {
        return Err(GenError::InvalidLevel(format!("sudoku clue count {clues}")));
    }
    let mut rng = split_rng(seed, "sudoku");
    for _ in 0..MAX_ATTEMPTS {
        let full = random_full_grid(&mut rng);
        let mut puzzle = full.clone();
        let mut order: Vec<usize> = (0..81).collect();
        order.shuffle(&mut rng);
        let mut remaining = 81;
        for &i in &order {
            if remaining == clues {
                break;
            }
            let keep = puzzle[i];
            puzzle[i] = 0;
            if count_solutions(&puzzle, 2) == 1 {
                remaining -= 1;
            } else {
                puzzle[i] = keep;
            }
        }
        if remaining != clues {
            continue;
        }
        let level = Level::Clues(clues);
        let inst = TaskInstance {
            id: TaskInstance::make_id(TaskKind::Sudoku, level, seed),
            kind: TaskKind::Sudoku,
            level,
            seed,
            payload: Payload::Sudoku(SudokuPayload { givens: puzzle }),
        };
        return Ok((inst, SymbolicSolution::SudokuGrid(full)));
    }
    Err(GenError::GenerationStuck { kind: TaskKind::Sudoku, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve_sudoku;

    #[test]
    fn exact_clues_unique_solution() {
        for (seed, clues) in [(0, 30), (1, 45), (2, 80)] {
            let (inst, sol) = gen_sudoku(seed, clues).unwrap();
            let Payload::Sudoku(p) = &inst.payload else { unreachable!() };
            assert_eq!(p.givens.iter().filter(|&&d| d != 0).count(), clues);
            assert_eq!(count_solutions(&p.givens, 2), 1);
            assert_eq!(SymbolicSolution::SudokuGrid(solve_sudoku(&p.givens).unwrap()), sol);
        }
    }

    #[test]
    fn clue_bounds() {
        assert!(matches!(gen_sudoku(0, 16), Err(GenError::InvalidLevel(_))));
        assert!(matches!(gen_sudoku(0, 81), Err(GenError::InvalidLevel(_))));
    }
}
