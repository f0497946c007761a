//! Bitmask backtracking Sudoku solver and solution counter.

use rand::seq::SliceRandom;
use rand::Rng;

use super::OracleError;

const ALL_DIGITS: u16 = 0b11_1111_1110;

#[inline]
fn box_of(cell: usize) -> usize {
    (cell / 27) * 3 + (cell % 9) / 3
}

#[derive(Clone)]
struct Board {
    cells: [u8; 81],
    rows: [u16; 9],
    cols: [u16; 9],
    boxes: [u16; 9],
}

impl Board {
    /// `None` if the givens already conflict or contain a digit above 9.
    fn new(puzzle: &[u8]) -> Option<Board> {
        let mut b = Board { cells: [0; 81], rows: [0; 9], cols: [0; 9], boxes: [0; 9] };
        for (i, &d) in puzzle.iter().enumerate() {
            if d == 0 {
                continue;
            }
            if d > 9 || b.candidates(i) & (1 << d) == 0 {
                return None;
            }
            b.place(i, d);
        }
        Some(b)
    }

    #[inline]
    fn candidates(&self, i: usize) -> u16 {
        !(self.rows[i / 9] | self.cols[i % 9] | self.boxes[box_of(i)]) & ALL_DIGITS
    }

    #[inline]
    fn place(&mut self, i: usize, d: u8) {
        let bit = 1 << d;
        self.cells[i] = d;
        self.rows[i / 9] |= bit;
        self.cols[i % 9] |= bit;
        self.boxes[box_of(i)] |= bit;
    }

    #[inline]
    fn clear(&mut self, i: usize, d: u8) {
        let bit = !(1u16 << d);
        self.cells[i] = 0;
        self.rows[i / 9] &= bit;
        self.cols[i % 9] &= bit;
        self.boxes[box_of(i)] &= bit;
    }

    /// Blank cell with the fewest candidates (lowest index on ties), or `None`
    /// when the board is full.
    fn most_constrained(&self) -> Option<(usize, u16)> {
        let mut best: Option<(usize, u16)> = None;
        for i in 0..81 {
            if self.cells[i] != 0 {
                continue;
            }
            let c = self.candidates(i);
            match best {
                Some((_, bc)) if bc.count_ones() <= c.count_ones() => {}
                _ => {
                    best = Some((i, c));
                    if c.count_ones() <= 1 {
                        break;
                    }
                }
            }
        }
        best
    }

    /// Depth-first search; `visit` is called on each completed board and
    /// returns `false` to stop. `order` chooses the digit order at a branch.
    fn search(&mut self, order: &mut dyn FnMut(u16) -> Vec<u8>, visit: &mut dyn FnMut(&[u8; 81]) -> bool) -> bool {
        let Some((i, cands)) = self.most_constrained() else {
            return visit(&self.cells);
        };
        for d in order(cands) {
            self.place(i, d);
            let go_on = self.search(order, visit);
            self.clear(i, d);
            if !go_on {
                return false;
            }
        }
        true
    }
}

fn ascending(mask: u16) -> Vec<u8> {
    (1..=9).filter(|d| mask & (1 << d) != 0).collect()
}

fn check_shape(puzzle: &[u8]) -> Result<(), OracleError> {
    if puzzle.len() != 81 {
        return Err(OracleError::BadPuzzle(format!("{} cells", puzzle.len())));
    }
    Ok(())
}

/// The first completion in lowest-digit-first order.
pub fn solve_sudoku(puzzle: &[u8]) -> Result<Vec<u8>, OracleError> {
    check_shape(puzzle)?;
    let mut board = Board::new(puzzle).ok_or(OracleError::Unsatisfiable)?;
    let mut found = None;
    board.search(&mut ascending, &mut |cells| {
        found = Some(cells.to_vec());
        false
    });
    found.ok_or(OracleError::Unsatisfiable)
}

/// Number of distinct completions, stopping early at `cap`.
pub fn count_solutions(puzzle: &[u8], cap: usize) -> usize {
    if puzzle.len() != 81 || cap == 0 {
        return 0;
    }
    let Some(mut board) = Board::new(puzzle) else {
        return 0;
    };
    let mut n = 0;
    board.search(&mut ascending, &mut |_| {
        n += 1;
        n < cap
    });
    n
}

/// A uniformly shuffled-branch complete grid.
pub fn random_full_grid<R: Rng + ?Sized>(rng: &mut R) -> Vec<u8> {
    let mut board = Board::new(&[0; 81]).expect("empty board is consistent");
    let mut out = None;
    board.search(
        &mut |mask| {
            let mut ds = ascending(mask);
            ds.shuffle(rng);
            ds
        },
        &mut |cells| {
            out = Some(cells.to_vec());
            false
        },
    );
    out.expect("the empty board has completions")
}

/// All 27 row/column/box constraints hold on a full grid.
pub fn is_valid_solution(grid: &[u8]) -> bool {
    grid.len() == 81
        && grid.iter().all(|&d| (1..=9).contains(&d))
        && Board::new(grid).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::split_rng;

    #[test]
    fn one_blank_is_forced() {
        let g = random_full_grid(&mut split_rng(1, "t"));
        let mut p = g.clone();
        p[40] = 0;
        assert_eq!(solve_sudoku(&p).unwrap(), g);
        assert_eq!(count_solutions(&p, 5), 1);
    }

    #[test]
    fn contradictory_givens() {
        let mut p = vec![0u8; 81];
        p[0] = 5;
        p[8] = 5;
        assert_eq!(solve_sudoku(&p), Err(OracleError::Unsatisfiable));
        assert_eq!(count_solutions(&p, 2), 0);
        assert!(matches!(solve_sudoku(&p[..80]), Err(OracleError::BadPuzzle(_))));
    }

    #[test]
    fn empty_grid_has_many() {
        assert_eq!(count_solutions(&[0; 81], 2), 2);
        assert_eq!(count_solutions(&[0; 81], 7), 7);
        let s = solve_sudoku(&[0; 81]).unwrap();
        assert!(is_valid_solution(&s));
        // lowest-digit-first: first row is 1..9
        assert_eq!(&s[..9], &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn random_grids_are_valid_and_seeded() {
        let a = random_full_grid(&mut split_rng(9, "t"));
        let b = random_full_grid(&mut split_rng(9, "t"));
        let c = random_full_grid(&mut split_rng(10, "t"));
        assert!(is_valid_solution(&a));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn validity_rejects_bad_grids() {
        let g = random_full_grid(&mut split_rng(3, "t"));
        let mut bad = g.clone();
        bad.swap(0, 1);
        assert!(!is_valid_solution(&bad));
        let mut blank = g;
        blank[5] = 0;
        assert!(!is_valid_solution(&blank));
    }
}
