use super::{check_dims, InkMask, ParseError, INK_TAU};
use crate::render::RenderSpec;
use crate::types::{Cell, Move, Payload, RasterImage, TaskInstance};

/// Minimum inked fraction of a cell's central region.
pub const CELL_COVERAGE: f64 = 0.25;
/// Minimum inked fraction of the window straddling a shared cell boundary.
pub const LINK_COVERAGE: f64 = 0.5;

fn cell_inked(mask: &InkMask, c: Cell, px: usize) -> bool {
    let q = (px / 4) as isize;
    mask.coverage(c.col as isize * px as isize + q, c.row as isize * px as isize + q, px / 2, px / 2) >= CELL_COVERAGE
}

/// Ink crossing the boundary between `c` and its right or lower neighbor,
/// measured over a window half a cell long and one stroke wide.
fn link_inked(mask: &InkMask, c: Cell, mv: Move, px: usize) -> bool {
    let p = px as isize;
    let band = (px / 4).max(1);
    let across = p / 2 - band as isize / 2;
    let (x0, y0, w, h) = match mv {
        Move::R => ((c.col as isize + 1) * p - p / 4, c.row as isize * p + across, px / 2, band),
        Move::D => (c.col as isize * p + across, (c.row as isize + 1) * p - p / 4, band, px / 2),
        _ => unreachable!("links are probed rightward and downward"),
    };
    mask.coverage(x0, y0, w, h) >= LINK_COVERAGE
}

/// Read a start→goal move sequence from a navigation answer image.
pub fn parse_path(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<Vec<Move>, ParseError> {
    check_dims(img, inst, spec)?;
    let (size, start, goal) = match &inst.payload {
        Payload::Vsp(p) => (p.size, p.start, p.goal),
        Payload::Maze(p) => (p.size, p.start, p.goal),
        _ => unreachable!("dispatch guarantees a navigation payload"),
    };
    let px = spec.cell_px;
    let mask = InkMask::new(img, spec.palette.solution_ink, INK_TAU);
    let idx = |c: Cell| c.index(size);

    let mut node = vec![false; size * size];
    for r in 0..size {
        for col in 0..size {
            let c = Cell::new(r, col);
            node[idx(c)] = c == start || c == goal || cell_inked(&mask, c, px);
        }
    }
    let mut adj: Vec<Vec<(Move, Cell)>> = vec![Vec::new(); size * size];
    for r in 0..size {
        for col in 0..size {
            let c = Cell::new(r, col);
            for mv in [Move::R, Move::D] {
                let Some(n) = c.step(mv, size) else { continue };
                if node[idx(c)] && node[idx(n)] && link_inked(&mask, c, mv, px) {
                    adj[idx(c)].push((mv, n));
                    adj[idx(n)].push((mv.opposite(), c));
                }
            }
        }
    }

    for (i, a) in adj.iter().enumerate() {
        let c = Cell::new(i / size, i % size);
        let limit = if c == start || c == goal { 1 } else { 2 };
        if a.len() > limit {
            return Err(ParseError::AmbiguousPath(format!("{c} has {} inked neighbors", a.len())));
        }
    }

    let mut moves = Vec::new();
    let mut visited = vec![false; size * size];
    let mut cur = start;
    visited[idx(cur)] = true;
    while cur != goal {
        let Some(&(mv, next)) = adj[idx(cur)].iter().find(|(_, n)| !visited[idx(*n)]) else {
            return Err(ParseError::NoPath);
        };
        moves.push(mv);
        visited[idx(next)] = true;
        cur = next;
    }
    let stray = (0..size * size).find(|&i| node[i] && !visited[i] && !adj[i].is_empty());
    if let Some(i) = stray {
        return Err(ParseError::AmbiguousPath(format!(
            "inked cells off the route at {}",
            Cell::new(i / size, i % size)
        )));
    }
    Ok(moves)
}
