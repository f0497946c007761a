//! Exact solvers and the symbolic verifier.

mod grid;
mod sudoku;
mod tsp;

pub use grid::{bfs_shortest_path, distances_to, trace, GridGraph};
pub use sudoku::{count_solutions, is_valid_solution, random_full_grid, solve_sudoku};
pub use tsp::{canonical_tour, dist, held_karp, tour_length, MAX_CITIES, MIN_CITIES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rewards::{r_jigsaw, r_plan, r_sudoku, r_tsp, TOUR_EPS};
use crate::types::{Cell, Payload, SymbolicSolution, TaskInstance, TaskKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("goal is unreachable")]
    NoPath,
    #[error("cell {0} is blocked or off the grid")]
    Blocked(Cell),
    #[error("start and goal coincide")]
    SameStartGoal,
    #[error("city count {0} outside {MIN_CITIES}..={MAX_CITIES}")]
    CityCount(usize),
    #[error("city index {0} out of range")]
    CityIndex(usize),
    #[error("puzzle has no solution")]
    Unsatisfiable,
    #[error("malformed puzzle: {0}")]
    BadPuzzle(String),
    #[error("{got:?} answer does not fit a {kind} instance")]
    KindMismatch { kind: TaskKind, got: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    /// Partial-credit reward; exactly 1.0 whenever `correct`.
    pub partial_reward: f64,
    pub reason: String,
    /// For navigation kinds: whether the candidate is as short as the oracle
    /// path (the strict reading of correctness).
    pub shortest: Option<bool>,
}

impl Verdict {
    fn wrong(reward: f64, reason: impl Into<String>) -> Self {
        Verdict { correct: false, partial_reward: reward, reason: reason.into(), shortest: None }
    }

    fn right() -> Self {
        Verdict { correct: true, partial_reward: 1.0, reason: "ok".into(), shortest: None }
    }
}

fn variant_name(s: &SymbolicSolution) -> &'static str {
    match s {
        SymbolicSolution::Actions(_) => "actions",
        SymbolicSolution::Tour(_) => "tour",
        SymbolicSolution::SudokuGrid(_) => "sudoku_grid",
        SymbolicSolution::Permutation(_) => "permutation",
    }
}

/// The oracle answer for an instance.
pub fn ground_truth(instance: &TaskInstance) -> Result<SymbolicSolution, OracleError> {
    Ok(match &instance.payload {
        Payload::Vsp(p) => SymbolicSolution::Actions(bfs_shortest_path(p, p.start, p.goal)?),
        Payload::Maze(p) => SymbolicSolution::Actions(bfs_shortest_path(p, p.start, p.goal)?),
        Payload::Tsp(p) => SymbolicSolution::Tour(held_karp(&p.cities, p.start)?),
        Payload::Sudoku(p) => SymbolicSolution::SudokuGrid(solve_sudoku(&p.givens)?),
        Payload::Jigsaw(p) => SymbolicSolution::Permutation(p.labels()),
    })
}

/// Check `candidate` against the instance, computing the ground truth with
/// the oracles.
pub fn verify(instance: &TaskInstance, candidate: &SymbolicSolution) -> Result<Verdict, OracleError> {
    if !candidate.fits(instance.kind) {
        return Err(OracleError::KindMismatch { kind: instance.kind, got: variant_name(candidate) });
    }
    let truth = ground_truth(instance)?;
    verify_with(instance, candidate, &truth)
}

/// Like [`verify`] with a known ground truth (e.g. read from a manifest).
pub fn verify_with(
    instance: &TaskInstance,
    candidate: &SymbolicSolution,
    truth: &SymbolicSolution,
) -> Result<Verdict, OracleError> {
    let mismatch = || OracleError::KindMismatch { kind: instance.kind, got: variant_name(candidate) };
    match (&instance.payload, candidate, truth) {
        (Payload::Vsp(p), SymbolicSolution::Actions(moves), SymbolicSolution::Actions(gt)) => {
            let v = check_walk(p, p.start, p.goal, moves, |c| {
                p.is_hole(c).then(|| format!("hole at {c}"))
            }, |_, _| None);
            Ok(finish_walk(v, moves, gt))
        }
        (Payload::Maze(p), SymbolicSolution::Actions(moves), SymbolicSolution::Actions(gt)) => {
            let v = check_walk(p, p.start, p.goal, moves, |_| None, |c, mv| {
                (!p.open(c, mv)).then(|| format!("wall crossed leaving {c} toward {}", mv.as_char()))
            });
            Ok(finish_walk(v, moves, gt))
        }
        (Payload::Tsp(p), SymbolicSolution::Tour(tour), SymbolicSolution::Tour(gt)) => {
            let n = p.cities.len();
            if let Some(&bad) = tour.iter().find(|&&c| c >= n) {
                return Ok(Verdict::wrong(0.0, format!("city index {bad} out of range")));
            }
            let reward = r_tsp(tour, gt, &p.cities).map_err(|_| OracleError::CityIndex(n))?;
            let mut seen = vec![false; n];
            let is_perm = tour.len() == n && tour.iter().all(|&c| !std::mem::replace(&mut seen[c], true));
            if !is_perm {
                return Ok(Verdict::wrong(reward, "tour is not a permutation of the cities"));
            }
            if tour[0] != p.start {
                return Ok(Verdict::wrong(reward, format!("tour starts at {}, not {}", tour[0], p.start)));
            }
            let gap = tour_length(&p.cities, tour) - tour_length(&p.cities, gt);
            if gap.abs() < TOUR_EPS {
                Ok(Verdict::right())
            } else {
                Ok(Verdict::wrong(reward, format!("tour longer than optimum by {gap:.6}")))
            }
        }
        (Payload::Sudoku(p), SymbolicSolution::SudokuGrid(grid), SymbolicSolution::SudokuGrid(gt)) => {
            let reward = r_sudoku(grid, gt);
            if grid.len() != 81 {
                return Ok(Verdict::wrong(reward, format!("{} digits, expected 81", grid.len())));
            }
            if let Some(i) = (0..81).find(|&i| p.givens[i] != 0 && p.givens[i] != grid[i]) {
                return Ok(Verdict::wrong(reward, format!("given at cell {i} changed")));
            }
            if !is_valid_solution(grid) {
                return Ok(Verdict::wrong(reward, "row/column/box constraint violated"));
            }
            Ok(Verdict::right())
        }
        (Payload::Jigsaw(p), SymbolicSolution::Permutation(perm), SymbolicSolution::Permutation(gt)) => {
            let reward = r_jigsaw(perm, gt, p.n());
            if perm == gt {
                Ok(Verdict::right())
            } else {
                Ok(Verdict::wrong(reward, "patches misplaced"))
            }
        }
        _ => Err(mismatch()),
    }
}

enum Walk {
    Valid,
    Invalid(String),
}

fn check_walk<G: GridGraph>(
    grid: &G,
    start: Cell,
    goal: Cell,
    moves: &[crate::types::Move],
    blocked: impl Fn(Cell) -> Option<String>,
    crossing: impl Fn(Cell, crate::types::Move) -> Option<String>,
) -> Walk {
    if moves.is_empty() {
        return Walk::Invalid("empty action sequence".into());
    }
    let mut cur = start;
    for (i, &mv) in moves.iter().enumerate() {
        if let Some(why) = crossing(cur, mv) {
            return Walk::Invalid(why);
        }
        let Some(next) = cur.step(mv, grid.size()) else {
            return Walk::Invalid(format!("move {i} leaves the grid at {cur}"));
        };
        if let Some(why) = blocked(next) {
            return Walk::Invalid(why);
        }
        cur = next;
    }
    if cur == goal {
        Walk::Valid
    } else {
        Walk::Invalid(format!("ends at {cur}, not the goal {goal}"))
    }
}

fn finish_walk(walk: Walk, moves: &[crate::types::Move], gt: &[crate::types::Move]) -> Verdict {
    let reward = r_plan(moves, gt).unwrap_or(0.0);
    match walk {
        Walk::Valid => Verdict { shortest: Some(moves.len() == gt.len()), ..Verdict::right() },
        Walk::Invalid(why) => Verdict { shortest: Some(false), ..Verdict::wrong(reward, why) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Level, Move::*, VspPayload};

    fn vsp3() -> TaskInstance {
        // S . .
        // . # .
        // . . G
        let mut holes = vec![false; 9];
        holes[4] = true;
        TaskInstance {
            id: "t".into(),
            kind: TaskKind::VspFrozenLake,
            level: Level::GridSize(3),
            seed: 0,
            payload: Payload::Vsp(VspPayload { size: 3, holes, start: Cell::new(0, 0), goal: Cell::new(2, 2) }),
        }
    }

    #[test]
    fn ground_truth_is_correct() {
        let inst = vsp3();
        let gt = ground_truth(&inst).unwrap();
        assert_eq!(gt, SymbolicSolution::Actions(vec![R, R, D, D]));
        let v = verify(&inst, &gt).unwrap();
        assert!(v.correct);
        assert_eq!(v.partial_reward, 1.0);
        assert_eq!(v.shortest, Some(true));
    }

    #[test]
    fn hole_entry_is_reported() {
        let v = verify(&vsp3(), &SymbolicSolution::Actions(vec![R, D, D, R])).unwrap();
        assert!(!v.correct);
        assert_eq!(v.reason, "hole at (1,1)");
        assert_eq!(v.partial_reward, 0.25);
    }

    #[test]
    fn other_valid_paths_count() {
        let v = verify(&vsp3(), &SymbolicSolution::Actions(vec![D, D, R, R])).unwrap();
        assert!(v.correct);
        assert_eq!(v.partial_reward, 1.0);
        let long = verify(&vsp3(), &SymbolicSolution::Actions(vec![R, L, R, R, D, D])).unwrap();
        assert!(long.correct);
        assert_eq!(long.shortest, Some(false));
    }

    #[test]
    fn off_grid_and_short_walks_fail() {
        assert!(!verify(&vsp3(), &SymbolicSolution::Actions(vec![U])).unwrap().correct);
        assert!(!verify(&vsp3(), &SymbolicSolution::Actions(vec![R, R])).unwrap().correct);
        assert!(!verify(&vsp3(), &SymbolicSolution::Actions(vec![])).unwrap().correct);
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        assert!(matches!(
            verify(&vsp3(), &SymbolicSolution::Tour(vec![0, 1, 2])),
            Err(OracleError::KindMismatch { .. })
        ));
    }

    #[test]
    fn reversed_optimal_tour_is_correct() {
        let cities = vec![[0.1, 0.1], [0.9, 0.2], [0.8, 0.8], [0.2, 0.9], [0.5, 0.4]];
        let inst = TaskInstance {
            id: "t".into(),
            kind: TaskKind::Tsp,
            level: Level::Cities(5),
            seed: 0,
            payload: Payload::Tsp(crate::types::TspPayload { cities: cities.clone(), start: 0 }),
        };
        let SymbolicSolution::Tour(gt) = ground_truth(&inst).unwrap() else { unreachable!() };
        let mut rev = gt.clone();
        rev[1..].reverse();
        let v = verify(&inst, &SymbolicSolution::Tour(rev)).unwrap();
        assert!(v.correct, "{v:?}");
        let mut bad = gt.clone();
        bad.swap(1, 2);
        let v = verify(&inst, &SymbolicSolution::Tour(bad)).unwrap();
        assert!(!v.correct);
        assert_eq!(v.partial_reward, 0.5);
        let v = verify(&inst, &SymbolicSolution::Tour(vec![0, 1, 1, 2, 3])).unwrap();
        assert!(!v.correct);
    }
}
