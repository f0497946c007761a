//! Shared domain types: task kinds, difficulty levels, instances, solutions
//! and raster images.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[serde(rename = "vsp")]
    VspFrozenLake,
    Maze,
    Tsp,
    Sudoku,
    Jigsaw,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::VspFrozenLake,
        TaskKind::Maze,
        TaskKind::Tsp,
        TaskKind::Sudoku,
        TaskKind::Jigsaw,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            TaskKind::VspFrozenLake => "vsp",
            TaskKind::Maze => "maze",
            TaskKind::Tsp => "tsp",
            TaskKind::Sudoku => "sudoku",
            TaskKind::Jigsaw => "jigsaw",
        }
    }

    /// Every difficulty level that appears in the published train/test tables.
    pub fn levels(self) -> Vec<Level> {
        match self {
            TaskKind::VspFrozenLake => [3, 4, 5, 6, 7, 8, 16, 32].map(Level::GridSize).to_vec(),
            TaskKind::Maze => [8, 16, 32].map(Level::GridSize).to_vec(),
            TaskKind::Tsp => (12..=18).map(Level::Cities).collect(),
            TaskKind::Sudoku => [30, 35, 40, 45].map(Level::Clues).to_vec(),
            TaskKind::Jigsaw => [(1, 2), (1, 3), (2, 1), (3, 1), (2, 2), (3, 3), (4, 4)]
                .map(|(rows, cols)| Level::Layout { rows, cols })
                .to_vec(),
        }
    }

    /// Parse a level string ("8", "4x4") in the context of this kind.
    pub fn parse_level(self, s: &str) -> Result<Level, TypeError> {
        let bad = || TypeError::InvalidLevel(format!("{s:?} for {}", self.slug()));
        let level = match self {
            TaskKind::Jigsaw => {
                let (r, c) = s.split_once(['x', 'X', '×']).ok_or_else(bad)?;
                Level::Layout {
                    rows: r.trim().parse().map_err(|_| bad())?,
                    cols: c.trim().parse().map_err(|_| bad())?,
                }
            }
            _ => {
                let v: usize = s.trim().parse().map_err(|_| bad())?;
                match self {
                    TaskKind::VspFrozenLake | TaskKind::Maze => Level::GridSize(v),
                    TaskKind::Tsp => Level::Cities(v),
                    TaskKind::Sudoku => Level::Clues(v),
                    TaskKind::Jigsaw => unreachable!(),
                }
            }
        };
        if self.admits(level) {
            Ok(level)
        } else {
            Err(bad())
        }
    }

    /// Whether `level` is one of this kind's published difficulty levels.
    pub fn admits(self, level: Level) -> bool {
        self.levels().contains(&level)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TaskKind {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vsp" | "vsp-super" | "frozenlake" | "frozen-lake" => Ok(TaskKind::VspFrozenLake),
            "maze" => Ok(TaskKind::Maze),
            "tsp" => Ok(TaskKind::Tsp),
            "sudoku" => Ok(TaskKind::Sudoku),
            "jigsaw" => Ok(TaskKind::Jigsaw),
            other => Err(TypeError::UnknownKind(other.to_string())),
        }
    }
}

/// Difficulty level, tagged by what it measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    GridSize(usize),
    Cities(usize),
    Clues(usize),
    Layout { rows: usize, cols: usize },
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Level::GridSize(v) | Level::Cities(v) | Level::Clues(v) => write!(f, "{v}"),
            Level::Layout { rows, cols } => write!(f, "{rows}x{cols}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("unknown task kind {0:?}")]
    UnknownKind(String),
    #[error("malformed instance id {0:?}")]
    InvalidId(String),
    #[error("invalid level {0}")]
    InvalidLevel(String),
    #[error("image buffer has {got} bytes, expected {expected}")]
    BadBuffer { expected: usize, got: usize },
    #[error("image dimensions must be positive")]
    EmptyImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// The neighbor reached by `mv`, if it stays inside a `size`×`size` grid.
    pub fn step(self, mv: Move, size: usize) -> Option<Cell> {
        let (dr, dc) = mv.delta();
        let r = self.row as isize + dr;
        let c = self.col as isize + dc;
        (r >= 0 && c >= 0 && (r as usize) < size && (c as usize) < size)
            .then(|| Cell::new(r as usize, c as usize))
    }

    pub fn index(self, size: usize) -> usize {
        self.row * size + self.col
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// A grid move. The declaration order is the tie-break order used by the
/// path oracles: right, down, left, up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    R,
    D,
    L,
    U,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::R, Move::D, Move::L, Move::U];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Move::R => (0, 1),
            Move::D => (1, 0),
            Move::L => (0, -1),
            Move::U => (-1, 0),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Move::R => 'R',
            Move::D => 'D',
            Move::L => 'L',
            Move::U => 'U',
        }
    }

    pub fn from_char(c: char) -> Option<Move> {
        match c {
            'R' => Some(Move::R),
            'D' => Some(Move::D),
            'L' => Some(Move::L),
            'U' => Some(Move::U),
            _ => None,
        }
    }

    /// The move from `a` to an orthogonally adjacent `b`.
    pub fn between(a: Cell, b: Cell) -> Option<Move> {
        Move::ALL.into_iter().find(|m| {
            let (dr, dc) = m.delta();
            a.row as isize + dr == b.row as isize && a.col as isize + dc == b.col as isize
        })
    }

    pub fn opposite(self) -> Move {
        match self {
            Move::R => Move::L,
            Move::D => Move::U,
            Move::L => Move::R,
            Move::U => Move::D,
        }
    }
}

impl Serialize for Move {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_char(self.as_char())
    }
}

impl<'de> Deserialize<'de> for Move {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let c = char::deserialize(d)?;
        Move::from_char(c).ok_or_else(|| serde::de::Error::custom(format!("bad move {c:?}")))
    }
}

/// Move sequences serialize as compact strings such as `"RRDL"`.
mod moves_serde {
    use super::Move;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(moves: &[Move], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&moves.iter().map(|m| m.as_char()).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Move>, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| Move::from_char(c).ok_or_else(|| D::Error::custom(format!("bad move {c:?}"))))
            .collect()
    }
}

/// Frozen-lake grid: `holes[r * size + c]` marks a hole.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VspPayload {
    pub size: usize,
    pub holes: Vec<bool>,
    pub start: Cell,
    pub goal: Cell,
}

impl VspPayload {
    pub fn is_hole(&self, c: Cell) -> bool {
        self.holes[c.index(self.size)]
    }
}

/// Wall bits stored per maze cell.
pub mod wall {
    pub const N: u8 = 1;
    pub const E: u8 = 2;
    pub const S: u8 = 4;
    pub const W: u8 = 8;
    pub const ALL: u8 = N | E | S | W;
}

/// Maze grid: `walls[r * size + c]` holds the cell's wall bits (see [`wall`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MazePayload {
    pub size: usize,
    pub walls: Vec<u8>,
    pub start: Cell,
    pub goal: Cell,
}

impl MazePayload {
    pub fn wall_bit(mv: Move) -> u8 {
        match mv {
            Move::U => wall::N,
            Move::R => wall::E,
            Move::D => wall::S,
            Move::L => wall::W,
        }
    }

    /// Whether moving from `c` in direction `mv` is open.
    pub fn open(&self, c: Cell, mv: Move) -> bool {
        self.walls[c.index(self.size)] & Self::wall_bit(mv) == 0 && c.step(mv, self.size).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspPayload {
    /// City coordinates in the unit square.
    pub cities: Vec<[f64; 2]>,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SudokuPayload {
    /// 81 digits, row-major, 0 = blank.
    pub givens: Vec<u8>,
}

/// Jigsaw board: input slot `s` shows source patch `shuffle[s]`, labeled `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JigsawPayload {
    pub rows: usize,
    pub cols: usize,
    pub shuffle: Vec<usize>,
    pub texture_seed: u64,
}

impl JigsawPayload {
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    /// For each source patch, the label (input slot) it carries.
    pub fn labels(&self) -> Vec<usize> {
        let mut inv = vec![0; self.shuffle.len()];
        for (slot, &patch) in self.shuffle.iter().enumerate() {
            inv[patch] = slot;
        }
        inv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Vsp(VspPayload),
    Maze(MazePayload),
    Tsp(TspPayload),
    Sudoku(SudokuPayload),
    Jigsaw(JigsawPayload),
}

impl Payload {
    pub fn kind(&self) -> TaskKind {
        match self {
            Payload::Vsp(_) => TaskKind::VspFrozenLake,
            Payload::Maze(_) => TaskKind::Maze,
            Payload::Tsp(_) => TaskKind::Tsp,
            Payload::Sudoku(_) => TaskKind::Sudoku,
            Payload::Jigsaw(_) => TaskKind::Jigsaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    pub level: Level,
    pub seed: u64,
    pub payload: Payload,
}

impl TaskInstance {
    pub fn make_id(kind: TaskKind, level: Level, seed: u64) -> String {
        format!("{}-{}-{:016x}", kind.slug(), level, seed)
    }

    /// Inverse of [`TaskInstance::make_id`].
    pub fn parse_id(id: &str) -> Result<(TaskKind, Level, u64), TypeError> {
        let bad = || TypeError::InvalidId(id.to_string());
        let (kind, rest) = id.split_once('-').ok_or_else(bad)?;
        let (level, seed) = rest.rsplit_once('-').ok_or_else(bad)?;
        let kind: TaskKind = kind.parse()?;
        let level = kind.parse_level(level)?;
        if seed.len() != 16 {
            return Err(bad());
        }
        let seed = u64::from_str_radix(seed, 16).map_err(|_| bad())?;
        Ok((kind, level, seed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum SymbolicSolution {
    Actions(#[serde(with = "moves_serde")] Vec<Move>),
    Tour(Vec<usize>),
    SudokuGrid(Vec<u8>),
    Permutation(Vec<usize>),
}

impl SymbolicSolution {
    /// The task kinds whose answers take this shape.
    pub fn fits(&self, kind: TaskKind) -> bool {
        matches!(
            (self, kind),
            (SymbolicSolution::Actions(_), TaskKind::VspFrozenLake | TaskKind::Maze)
                | (SymbolicSolution::Tour(_), TaskKind::Tsp)
                | (SymbolicSolution::SudokuGrid(_), TaskKind::Sudoku)
                | (SymbolicSolution::Permutation(_), TaskKind::Jigsaw)
        )
    }
}

pub type Rgb = [u8; 3];

/// RGB8 row-major image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RasterImage({}x{})", self.width, self.height)
    }
}

impl RasterImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let pixels = color.iter().copied().cycle().take(3 * width * height).collect();
        RasterImage { width, height, pixels }
    }

    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::EmptyImage);
        }
        let expected = 3 * width * height;
        if pixels.len() != expected {
            return Err(TypeError::BadBuffer { expected, got: pixels.len() });
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, c: Rgb) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Copy `src` into this image with its top-left corner at `(x0, y0)`.
    pub fn blit(&mut self, src: &RasterImage, x0: usize, y0: usize) {
        for y in 0..src.height.min(self.height.saturating_sub(y0)) {
            let w = src.width.min(self.width.saturating_sub(x0));
            let s = 3 * y * src.width;
            let d = 3 * ((y0 + y) * self.width + x0);
            self.pixels[d..d + 3 * w].copy_from_slice(&src.pixels[s..s + 3 * w]);
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RasterImage {
        let mut out = Vec::with_capacity(3 * w * h);
        for y in y0..y0 + h {
            let s = 3 * (y * self.width + x0);
            out.extend_from_slice(&self.pixels[s..s + 3 * w]);
        }
        RasterImage { width: w, height: h, pixels: out }
    }

    /// Concatenate same-height frames left to right.
    pub fn hstack(frames: &[RasterImage]) -> Option<RasterImage> {
        let first = frames.first()?;
        let h = first.height;
        if frames.iter().any(|f| f.height != h) {
            return None;
        }
        let w: usize = frames.iter().map(|f| f.width).sum();
        let mut out = RasterImage::filled(w, h, [0, 0, 0]);
        let mut x = 0;
        for f in frames {
            out.blit(f, x, 0);
            x += f.width;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for kind in TaskKind::ALL {
            for level in kind.levels() {
                let id = TaskInstance::make_id(kind, level, 0xdead_beef);
                assert_eq!(TaskInstance::parse_id(&id), Ok((kind, level, 0xdead_beef)));
            }
        }
        for bad in ["", "vsp", "vsp-3", "vsp-3-12", "nope-3-00000000000000ff", "vsp-9-00000000000000ff"] {
            assert!(TaskInstance::parse_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn level_parsing_respects_kind_tables() {
        assert_eq!(TaskKind::Maze.parse_level("16"), Ok(Level::GridSize(16)));
        assert_eq!(
            TaskKind::Jigsaw.parse_level("4x4"),
            Ok(Level::Layout { rows: 4, cols: 4 })
        );
        assert!(TaskKind::Maze.parse_level("9").is_err());
        assert!(TaskKind::Jigsaw.parse_level("1x1").is_err());
        assert!(TaskKind::Sudoku.parse_level("abc").is_err());
        for kind in TaskKind::ALL {
            for level in kind.levels() {
                assert_eq!(kind.parse_level(&level.to_string()), Ok(level));
            }
        }
    }

    #[test]
    fn solution_json_is_compact_and_round_trips() {
        let s = SymbolicSolution::Actions(vec![Move::R, Move::D, Move::D]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"type":"actions","value":"RDD"}"#);
        assert_eq!(serde_json::from_str::<SymbolicSolution>(&j).unwrap(), s);
        assert!(serde_json::from_str::<SymbolicSolution>(r#"{"type":"actions","value":"RX"}"#).is_err());
    }

    #[test]
    fn raster_buffer_length_is_checked() {
        assert!(RasterImage::from_raw(2, 2, vec![0; 12]).is_ok());
        assert_eq!(
            RasterImage::from_raw(2, 2, vec![0; 11]),
            Err(TypeError::BadBuffer { expected: 12, got: 11 })
        );
        assert_eq!(RasterImage::from_raw(0, 2, vec![]), Err(TypeError::EmptyImage));
    }

    #[test]
    fn hstack_places_frames_side_by_side() {
        let a = RasterImage::filled(2, 3, [255, 0, 0]);
        let b = RasterImage::filled(4, 3, [0, 255, 0]);
        let m = RasterImage::hstack(&[a, b]).unwrap();
        assert_eq!((m.width(), m.height()), (6, 3));
        assert_eq!(m.get(1, 2), [255, 0, 0]);
        assert_eq!(m.get(2, 0), [0, 255, 0]);
    }
}
