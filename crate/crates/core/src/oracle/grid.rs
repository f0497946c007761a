//! Shortest paths on 4-connected grids with blocked cells or walls.

use std::collections::VecDeque;

use super::OracleError;
use crate::types::{Cell, MazePayload, Move, VspPayload};

/// A square grid whose moves may be blocked.
pub trait GridGraph {
    fn size(&self) -> usize;
    /// Whether a path may stand on `c`.
    fn passable(&self, c: Cell) -> bool;
    /// Whether the move `mv` out of `c` is allowed. Moves are symmetric.
    fn can_move(&self, c: Cell, mv: Move) -> Option<Cell>;
}

impl GridGraph for VspPayload {
    fn size(&self) -> usize {
        self.size
    }

    fn passable(&self, c: Cell) -> bool {
        c.row < self.size && c.col < self.size && !self.is_hole(c)
    }

    fn can_move(&self, c: Cell, mv: Move) -> Option<Cell> {
        c.step(mv, self.size).filter(|&n| !self.is_hole(n))
    }
}

impl GridGraph for MazePayload {
    fn size(&self) -> usize {
        self.size
    }

    fn passable(&self, c: Cell) -> bool {
        c.row < self.size && c.col < self.size
    }

    fn can_move(&self, c: Cell, mv: Move) -> Option<Cell> {
        if self.open(c, mv) {
            c.step(mv, self.size)
        } else {
            None
        }
    }
}

/// BFS distances to `target` for every cell (`usize::MAX` when unreachable).
pub fn distances_to<G: GridGraph + ?Sized>(grid: &G, target: Cell) -> Vec<usize> {
    let n = grid.size();
    let mut dist = vec![usize::MAX; n * n];
    dist[target.index(n)] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.index(n)];
        for mv in Move::ALL {
            if let Some(nb) = grid.can_move(c, mv) {
                let slot = &mut dist[nb.index(n)];
                if *slot == usize::MAX {
                    *slot = d + 1;
                    queue.push_back(nb);
                }
            }
        }
    }
    dist
}

/// Shortest start→goal move sequence. Among equally short paths the one that
/// is lexicographically smallest under the move order R < D < L < U wins.
pub fn bfs_shortest_path<G: GridGraph + ?Sized>(
    grid: &G,
    start: Cell,
    goal: Cell,
) -> Result<Vec<Move>, OracleError> {
    for c in [start, goal] {
        if !grid.passable(c) {
            return Err(OracleError::Blocked(c));
        }
    }
    if start == goal {
        return Err(OracleError::SameStartGoal);
    }
    let n = grid.size();
    let dist = distances_to(grid, goal);
    if dist[start.index(n)] == usize::MAX {
        return Err(OracleError::NoPath);
    }
    let mut path = Vec::with_capacity(dist[start.index(n)]);
    let mut cur = start;
    while cur != goal {
        let d = dist[cur.index(n)];
        let (mv, next) = Move::ALL
            .into_iter()
            .find_map(|mv| {
                grid.can_move(cur, mv)
                    .filter(|nb| dist[nb.index(n)] + 1 == d)
                    .map(|nb| (mv, nb))
            })
            .expect("a BFS predecessor always exists on a finite distance");
        path.push(mv);
        cur = next;
    }
    Ok(path)
}

/// Cells visited by `moves` from `start`, or the index of the first move that
/// leaves the grid.
pub fn trace(start: Cell, moves: &[Move], size: usize) -> Result<Vec<Cell>, usize> {
    let mut cells = Vec::with_capacity(moves.len() + 1);
    cells.push(start);
    let mut cur = start;
    for (i, &mv) in moves.iter().enumerate() {
        cur = cur.step(mv, size).ok_or(i)?;
        cells.push(cur);
    }
    Ok(cells)
}
