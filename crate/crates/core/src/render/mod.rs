//! Deterministic symbolic→raster rendering of problems and answers.
//!
//! Every size and color lives in [`RenderSpec`]; the parsers read the same
//! geometry back, so a rendered ground truth always parses to itself.

mod codec;
pub mod draw;
pub mod glyph;
mod texture;

pub use codec::{decode_png, encode_png, CodecError, MAX_SIDE};
pub use texture::jigsaw_source;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{is_valid_solution, trace};
use crate::types::{
    Cell, JigsawPayload, Level, MazePayload, Move, Payload, RasterImage, Rgb, SudokuPayload,
    SymbolicSolution, TaskInstance, TaskKind, TspPayload, VspPayload,
};
use draw::{fill_disk, fill_rect, polyline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Palette {
    pub background: Rgb,
    pub grid_line: Rgb,
    /// Holes and maze walls.
    pub blocked: Rgb,
    pub start: Rgb,
    /// Goal markers and TSP cities.
    pub goal: Rgb,
    pub solution_ink: Rgb,
    pub clue_ink: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            background: [255, 255, 255],
            grid_line: [160, 160, 160],
            blocked: [0, 0, 0],
            start: [255, 200, 0],
            goal: [0, 90, 220],
            solution_ink: [220, 30, 30],
            clue_ink: [0, 0, 0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSpec {
    pub cell_px: usize,
    pub palette: Palette,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec { cell_px: 16, palette: Palette::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("refusing to render an invalid answer: {0}")]
    RenderRefused(String),
    #[error("cell_px must be at least 8, got {0}")]
    CellTooSmall(usize),
    #[error("{0:?} answer does not fit a {1} instance")]
    KindMismatch(String, TaskKind),
}

impl RenderSpec {
    pub fn new(cell_px: usize) -> Result<Self, RenderError> {
        if cell_px < 8 {
            return Err(RenderError::CellTooSmall(cell_px));
        }
        Ok(RenderSpec { cell_px, ..Default::default() })
    }

    /// Canvas `(width, height)` for a kind at a level.
    pub fn canvas(&self, kind: TaskKind, level: Level) -> (usize, usize) {
        let c = self.cell_px;
        match (kind, level) {
            (TaskKind::VspFrozenLake | TaskKind::Maze, Level::GridSize(n)) => (n * c, n * c),
            (TaskKind::Tsp, _) => (32 * c, 32 * c),
            (TaskKind::Sudoku, _) => (9 * self.sudoku_cell(), 9 * self.sudoku_cell()),
            (TaskKind::Jigsaw, Level::Layout { rows, cols }) => {
                (cols * self.jigsaw_patch(), rows * self.jigsaw_patch())
            }
            _ => (c, c),
        }
    }

    pub fn canvas_for(&self, inst: &TaskInstance) -> (usize, usize) {
        match &inst.payload {
            Payload::Vsp(p) => (p.size * self.cell_px, p.size * self.cell_px),
            Payload::Maze(p) => (p.size * self.cell_px, p.size * self.cell_px),
            Payload::Jigsaw(p) => (p.cols * self.jigsaw_patch(), p.rows * self.jigsaw_patch()),
            _ => self.canvas(inst.kind, inst.level),
        }
    }

    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        let s = self.cell_px as f64;
        (c.col as f64 * s + s / 2.0, c.row as f64 * s + s / 2.0)
    }

    /// Half width of navigation path strokes (full width is a quarter cell).
    pub fn path_half_width(&self) -> f64 {
        self.cell_px as f64 / 8.0
    }

    pub fn marker_radius(&self) -> f64 {
        self.cell_px as f64 * 5.0 / 16.0
    }

    pub fn tsp_point(&self, p: [f64; 2]) -> (f64, f64) {
        let margin = self.cell_px as f64;
        let span = 30.0 * self.cell_px as f64;
        (margin + p[0] * span, margin + p[1] * span)
    }

    pub fn city_radius(&self) -> f64 {
        self.cell_px as f64 / 4.0
    }

    pub fn tour_half_width(&self) -> f64 {
        1.5 * self.cell_px as f64 / 16.0
    }

    pub fn sudoku_cell(&self) -> usize {
        2 * self.cell_px
    }

    pub fn glyph_scale(&self) -> usize {
        (self.sudoku_cell() * 3 / 32).max(1)
    }

    /// Top-left pixel of the digit box in Sudoku cell `i` (row-major).
    pub fn sudoku_glyph_origin(&self, i: usize) -> (usize, usize) {
        let sc = self.sudoku_cell();
        let s = self.glyph_scale();
        let ox = (sc - glyph::GLYPH_W * s) / 2;
        let oy = (sc - glyph::GLYPH_H * s) / 2;
        ((i % 9) * sc + ox, (i / 9) * sc + oy)
    }

    pub fn jigsaw_patch(&self) -> usize {
        4 * self.cell_px
    }

    /// Side of the label box in each patch's top-left corner.
    pub fn label_box(&self) -> usize {
        3 * self.cell_px / 4
    }
}

/// Draw a stroke of width 2 centered on pixel boundary `b` along one axis.
fn stroke_span(b: usize, len: usize) -> (usize, usize) {
    let lo = b.saturating_sub(1).min(len - 2);
    (lo, 2)
}

fn grid_lines(img: &mut RasterImage, n: usize, step: usize, color: Rgb) {
    let (w, h) = (img.width(), img.height());
    for k in 0..=n {
        let x = (k * step).min(w - 1);
        let y = (k * step).min(h - 1);
        fill_rect(img, x, 0, 1, h, color);
        fill_rect(img, 0, y, w, 1, color);
    }
}

fn vsp_base(p: &VspPayload, spec: &RenderSpec) -> RasterImage {
    let c = spec.cell_px;
    let pal = &spec.palette;
    let mut img = RasterImage::filled(p.size * c, p.size * c, pal.background);
    for r in 0..p.size {
        for col in 0..p.size {
            if p.is_hole(Cell::new(r, col)) {
                fill_rect(&mut img, col * c, r * c, c, c, pal.blocked);
            }
        }
    }
    grid_lines(&mut img, p.size, c, pal.grid_line);
    img
}

fn maze_base(p: &MazePayload, spec: &RenderSpec) -> RasterImage {
    let c = spec.cell_px;
    let pal = &spec.palette;
    let side = p.size * c;
    let mut img = RasterImage::filled(side, side, pal.background);
    grid_lines(&mut img, p.size, c, pal.grid_line);
    for r in 0..p.size {
        for col in 0..p.size {
            let w = p.walls[r * p.size + col];
            let (x0, y0) = (col * c, r * c);
            let run = |a: usize| (a.saturating_sub(1), (a + c + 1).min(side) - a.saturating_sub(1));
            if w & crate::types::wall::N != 0 {
                let (ys, hh) = stroke_span(y0, side);
                let (xs, ww) = run(x0);
                fill_rect(&mut img, xs, ys, ww, hh, pal.blocked);
            }
            if w & crate::types::wall::S != 0 {
                let (ys, hh) = stroke_span(y0 + c, side);
                let (xs, ww) = run(x0);
                fill_rect(&mut img, xs, ys, ww, hh, pal.blocked);
            }
            if w & crate::types::wall::W != 0 {
                let (xs, ww) = stroke_span(x0, side);
                let (ys, hh) = run(y0);
                fill_rect(&mut img, xs, ys, ww, hh, pal.blocked);
            }
            if w & crate::types::wall::E != 0 {
                let (xs, ww) = stroke_span(x0 + c, side);
                let (ys, hh) = run(y0);
                fill_rect(&mut img, xs, ys, ww, hh, pal.blocked);
            }
        }
    }
    img
}

fn nav_landmarks(img: &mut RasterImage, start: Cell, goal: Cell, spec: &RenderSpec) {
    fill_disk(img, spec.cell_center(start), spec.marker_radius(), spec.palette.start);
    fill_disk(img, spec.cell_center(goal), spec.marker_radius(), spec.palette.goal);
}

fn tsp_landmarks(img: &mut RasterImage, p: &TspPayload, spec: &RenderSpec) {
    for (i, &city) in p.cities.iter().enumerate() {
        let color = if i == p.start { spec.palette.start } else { spec.palette.goal };
        fill_disk(img, spec.tsp_point(city), spec.city_radius(), color);
    }
}

fn sudoku_base(p: &SudokuPayload, spec: &RenderSpec) -> RasterImage {
    let sc = spec.sudoku_cell();
    let side = 9 * sc;
    let pal = &spec.palette;
    let mut img = RasterImage::filled(side, side, pal.background);
    grid_lines(&mut img, 9, sc, pal.grid_line);
    for k in [0, 3, 6, 9] {
        let b = (k * sc).min(side - 1);
        let lo = b.saturating_sub(1).min(side - 3);
        fill_rect(&mut img, lo, 0, 3, side, pal.grid_line);
        fill_rect(&mut img, 0, lo, side, 3, pal.grid_line);
    }
    for (i, &d) in p.givens.iter().enumerate() {
        if d != 0 {
            let (x, y) = spec.sudoku_glyph_origin(i);
            glyph::draw_digit(&mut img, d, x, y, spec.glyph_scale(), pal.clue_ink);
        }
    }
    img
}

/// Board with `placement[slot]` = label of the patch shown at `slot`.
fn jigsaw_board(p: &JigsawPayload, placement: &[usize], spec: &RenderSpec) -> RasterImage {
    let src = jigsaw_source(p, spec);
    let ps = spec.jigsaw_patch();
    let mut img = RasterImage::filled(p.cols * ps, p.rows * ps, spec.palette.background);
    let lb = spec.label_box();
    for (slot, &label) in placement.iter().enumerate() {
        let patch = p.shuffle[label];
        let (sx, sy) = ((patch % p.cols) * ps, (patch / p.cols) * ps);
        let (dx, dy) = ((slot % p.cols) * ps, (slot / p.cols) * ps);
        img.blit(&src.crop(sx, sy, ps, ps), dx, dy);
        fill_rect(&mut img, dx, dy, lb, lb, spec.palette.background);
        let tw = glyph::number_width(label);
        glyph::draw_number(
            &mut img,
            label,
            dx + lb.saturating_sub(tw) / 2,
            dy + lb.saturating_sub(glyph::GLYPH_H) / 2,
            spec.palette.clue_ink,
        );
    }
    img
}

/// The problem image.
pub fn render_instance(inst: &TaskInstance, spec: &RenderSpec) -> RasterImage {
    match &inst.payload {
        Payload::Vsp(p) => {
            let mut img = vsp_base(p, spec);
            nav_landmarks(&mut img, p.start, p.goal, spec);
            img
        }
        Payload::Maze(p) => {
            let mut img = maze_base(p, spec);
            nav_landmarks(&mut img, p.start, p.goal, spec);
            img
        }
        Payload::Tsp(p) => {
            let (w, h) = spec.canvas_for(inst);
            let mut img = RasterImage::filled(w, h, spec.palette.background);
            tsp_landmarks(&mut img, p, spec);
            img
        }
        Payload::Sudoku(p) => sudoku_base(p, spec),
        Payload::Jigsaw(p) => jigsaw_board(p, &(0..p.n()).collect::<Vec<_>>(), spec),
    }
}

fn path_points(start: Cell, moves: &[Move], size: usize, spec: &RenderSpec) -> Result<Vec<(f64, f64)>, RenderError> {
    let cells = trace(start, moves, size)
        .map_err(|i| RenderError::RenderRefused(format!("move {i} leaves the grid")))?;
    Ok(cells.into_iter().map(|c| spec.cell_center(c)).collect())
}

fn check_walk(
    start: Cell,
    goal: Cell,
    moves: &[Move],
    size: usize,
    ok: impl Fn(Cell, Move) -> bool,
) -> Result<(), RenderError> {
    if moves.is_empty() {
        return Err(RenderError::RenderRefused("empty action sequence".into()));
    }
    let mut cur = start;
    for &mv in moves {
        if !ok(cur, mv) {
            return Err(RenderError::RenderRefused(format!("blocked move {} at {cur}", mv.as_char())));
        }
        cur = cur.step(mv, size).expect("checked by ok");
    }
    if cur != goal {
        return Err(RenderError::RenderRefused(format!("path ends at {cur}")));
    }
    Ok(())
}

/// The problem image overlaid with a feasible answer.
///
/// Feasibility is structural: navigation paths must be legal walks to the
/// goal, tours permutations from the start city, Sudoku grids complete and
/// consistent with the givens, jigsaw placements bijective. Optimality is
/// not checked here.
pub fn render_solution(
    inst: &TaskInstance,
    sol: &SymbolicSolution,
    spec: &RenderSpec,
) -> Result<RasterImage, RenderError> {
    let refuse = |s: &str| Err(RenderError::RenderRefused(s.to_string()));
    match (&inst.payload, sol) {
        (Payload::Vsp(p), SymbolicSolution::Actions(m)) => {
            check_walk(p.start, p.goal, m, p.size, |c, mv| {
                c.step(mv, p.size).is_some_and(|n| !p.is_hole(n))
            })?;
        }
        (Payload::Maze(p), SymbolicSolution::Actions(m)) => {
            check_walk(p.start, p.goal, m, p.size, |c, mv| p.open(c, mv))?;
        }
        (Payload::Tsp(p), SymbolicSolution::Tour(t)) => {
            let n = p.cities.len();
            let mut seen = vec![false; n];
            if t.len() != n || t.iter().any(|&c| c >= n || std::mem::replace(&mut seen[c], true)) {
                return refuse("tour is not a permutation of the cities");
            }
            if t[0] != p.start {
                return refuse("tour does not begin at the start city");
            }
        }
        (Payload::Sudoku(p), SymbolicSolution::SudokuGrid(g)) => {
            if !is_valid_solution(g) {
                return refuse("grid violates Sudoku constraints");
            }
            if p.givens.iter().zip(g).any(|(&gv, &d)| gv != 0 && gv != d) {
                return refuse("grid changes a given");
            }
        }
        (Payload::Jigsaw(p), SymbolicSolution::Permutation(perm)) => {
            let n = p.n();
            let mut seen = vec![false; n];
            if perm.len() != n || perm.iter().any(|&c| c >= n || std::mem::replace(&mut seen[c], true)) {
                return refuse("placement is not a bijection");
            }
        }
        _ => {
            return Err(RenderError::KindMismatch(format!("{sol:?}").chars().take(24).collect(), inst.kind));
        }
    }
    Ok(render_answer_unchecked(inst, sol, spec))
}

/// Draw any shape-compatible answer without feasibility checks (used for
/// fixtures and stub samplers). Moves that leave the grid are truncated.
pub fn render_answer_unchecked(inst: &TaskInstance, sol: &SymbolicSolution, spec: &RenderSpec) -> RasterImage {
    let ink = spec.palette.solution_ink;
    match (&inst.payload, sol) {
        (Payload::Vsp(p), SymbolicSolution::Actions(m)) => {
            let mut img = vsp_base(p, spec);
            draw_walk(&mut img, p.start, m, p.size, spec);
            nav_landmarks(&mut img, p.start, p.goal, spec);
            img
        }
        (Payload::Maze(p), SymbolicSolution::Actions(m)) => {
            let mut img = maze_base(p, spec);
            draw_walk(&mut img, p.start, m, p.size, spec);
            nav_landmarks(&mut img, p.start, p.goal, spec);
            img
        }
        (Payload::Tsp(p), SymbolicSolution::Tour(t)) => {
            let (w, h) = spec.canvas_for(inst);
            let mut img = RasterImage::filled(w, h, spec.palette.background);
            let pts: Vec<_> = t.iter().filter(|&&c| c < p.cities.len()).map(|&c| spec.tsp_point(p.cities[c])).collect();
            polyline(&mut img, &pts, spec.tour_half_width(), true, ink);
            tsp_landmarks(&mut img, p, spec);
            img
        }
        (Payload::Sudoku(p), SymbolicSolution::SudokuGrid(g)) => {
            let mut img = sudoku_base(p, spec);
            for (i, &d) in g.iter().enumerate().take(81) {
                if p.givens[i] == 0 && (1..=9).contains(&d) {
                    let (x, y) = spec.sudoku_glyph_origin(i);
                    glyph::draw_digit(&mut img, d, x, y, spec.glyph_scale(), ink);
                }
            }
            img
        }
        (Payload::Jigsaw(p), SymbolicSolution::Permutation(perm)) => {
            let placement: Vec<usize> = (0..p.n()).map(|j| perm.get(j).copied().filter(|&l| l < p.n()).unwrap_or(j)).collect();
            jigsaw_board(p, &placement, spec)
        }
        _ => render_instance(inst, spec),
    }
}

fn draw_walk(img: &mut RasterImage, start: Cell, moves: &[Move], size: usize, spec: &RenderSpec) {
    let valid = match trace(start, moves, size) {
        Ok(_) => moves,
        Err(i) => &moves[..i],
    };
    let pts = path_points(start, valid, size, spec).expect("truncated to the grid");
    polyline(img, &pts, spec.path_half_width(), false, spec.palette.solution_ink);
}
