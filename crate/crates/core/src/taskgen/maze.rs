use rand::seq::SliceRandom;
use rand::Rng;

use super::{GenError, MAX_ATTEMPTS};
use crate::oracle::bfs_shortest_path;
use crate::seed::split_rng;
use crate::types::{wall, Cell, Level, MazePayload, Move, Payload, SymbolicSolution, TaskInstance, TaskKind};

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 64;

/// Perfect maze by randomized depth-first carving.
pub fn carve<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Vec<u8> {
    let mut walls = vec![wall::ALL; size * size];
    let mut visited = vec![false; size * size];
    let first = Cell::new(rng.random_range(0..size), rng.random_range(0..size));
    visited[first.index(size)] = true;
    let mut stack = vec![first];
    while let Some(&cur) = stack.last() {
        let mut moves = Move::ALL;
        moves.shuffle(rng);
        let next = moves.into_iter().find_map(|mv| {
            cur.step(mv, size).filter(|n| !visited[n.index(size)]).map(|n| (mv, n))
        });
        match next {
            Some((mv, n)) => {
                walls[cur.index(size)] &= !MazePayload::wall_bit(mv);
                walls[n.index(size)] &= !MazePayload::wall_bit(mv.opposite());
                visited[n.index(size)] = true;
                stack.push(n);
            }
            None => {
                stack.pop();
            }
        }
    }
    walls
}

/// Start and goal at Manhattan distance at least `size`.
pub fn gen_maze(seed: u64, size: usize) -> Result<(TaskInstance, SymbolicSolution), GenError> {
    if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
        return Err(GenError::InvalidLevel(format!("maze grid size {size}")));
    }
    let mut rng = split_rng(seed, "maze");
    let walls = carve(&mut rng, size);
    let mut pick = || Cell::new(rng.random_range(0..size), rng.random_range(0..size));
    for _ in 0..MAX_ATTEMPTS {
        let (start, goal) = (pick(), pick());
        if start.manhattan(goal) < size {
            continue;
        }
        let payload = MazePayload { size, walls, start, goal };
        let path = bfs_shortest_path(&payload, start, goal).expect("perfect mazes are connected");
        let level = Level::GridSize(size);
        let inst = TaskInstance {
            id: TaskInstance::make_id(TaskKind::Maze, level, seed),
            kind: TaskKind::Maze,
            level,
            seed,
            payload: Payload::Maze(payload),
        };
        return Ok((inst, SymbolicSolution::Actions(path)));
    }
    Err(GenError::GenerationStuck { kind: TaskKind::Maze, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_edges(p: &MazePayload) -> usize {
        let n = p.size;
        let mut k = 0;
        for r in 0..n {
            for c in 0..n {
                let cell = Cell::new(r, c);
                k += [Move::R, Move::D].iter().filter(|&&mv| p.open(cell, mv)).count();
            }
        }
        k
    }

    fn simple_paths(p: &MazePayload, cur: Cell, goal: Cell, seen: &mut Vec<bool>) -> usize {
        if cur == goal {
            return 1;
        }
        seen[cur.index(p.size)] = true;
        let mut total = 0;
        for mv in Move::ALL {
            if p.open(cur, mv) {
                let n = cur.step(mv, p.size).unwrap();
                if !seen[n.index(p.size)] {
                    total += simple_paths(p, n, goal, seen);
                }
            }
        }
        seen[cur.index(p.size)] = false;
        total
    }

    #[test]
    fn spanning_tree_edges() {
        for seed in 0..20 {
            let (inst, _) = gen_maze(seed, 8).unwrap();
            let Payload::Maze(p) = &inst.payload else { unreachable!() };
            assert_eq!(open_edges(p), 63);
        }
    }

    #[test]
    fn walls_are_symmetric_and_outer_ring_closed() {
        let (inst, _) = gen_maze(5, 8).unwrap();
        let Payload::Maze(p) = &inst.payload else { unreachable!() };
        for r in 0..8 {
            for c in 0..8 {
                let cell = Cell::new(r, c);
                for mv in Move::ALL {
                    match cell.step(mv, 8) {
                        None => assert!(!p.open(cell, mv)),
                        Some(n) => assert_eq!(p.open(cell, mv), p.open(n, mv.opposite())),
                    }
                }
            }
        }
    }

    #[test]
    fn unique_simple_path() {
        for seed in 0..30 {
            for size in [3, 5, 8] {
                let (inst, _) = gen_maze(seed, size).unwrap();
                let Payload::Maze(p) = &inst.payload else { unreachable!() };
                assert!(p.start.manhattan(p.goal) >= size);
                let mut seen = vec![false; size * size];
                assert_eq!(simple_paths(p, p.start, p.goal, &mut seen), 1);
            }
        }
    }
}
