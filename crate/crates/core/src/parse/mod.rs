//! Image → symbolic answer. Landmarks (cell lattice, start, goal, city
//! centers, givens, source patches) come from the instance; only the answer
//! is read from pixels.

mod hungarian;
mod jigsaw;
mod path;
mod sudoku;
pub mod tour;

pub use hungarian::assign_min_cost;
pub use jigsaw::{parse_jigsaw, JigsawParse, LOW_CONFIDENCE_COST};
pub use path::{parse_path, CELL_COVERAGE, LINK_COVERAGE};
pub use sudoku::{parse_sudoku, GLYPH_SLACK};
pub use tour::{parse_tour, EDGE_MIN_HITS, EDGE_SAMPLES};

use thiserror::Error;

use crate::render::RenderSpec;
use crate::types::{Payload, RasterImage, Rgb, SymbolicSolution, TaskInstance};

/// Default color tolerance, Euclidean RGB distance.
pub const INK_TAU: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("image is {got:?}, expected {expected:?}")]
    OffGrid { expected: (usize, usize), got: (usize, usize) },
    #[error("no inked route reaches the goal")]
    NoPath,
    #[error("ambiguous path: {0}")]
    AmbiguousPath(String),
    #[error("inked edges do not form a single tour")]
    NotACycle,
    #[error("city {city} has {degree} inked edges")]
    DegreeViolation { city: usize, degree: usize },
    #[error("given at cell {0} reads differently")]
    GivenMismatch(usize),
    #[error("cell {0} is illegible")]
    IllegibleCell(usize),
    #[error("patch assignment cost {0} is above the confidence threshold")]
    LowConfidence(u64),
}

/// Pixels within `tau` of a reference color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InkMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl InkMask {
    pub fn new(img: &RasterImage, color: Rgb, tau: f64) -> Self {
        Self::any_of(img, &[color], tau)
    }

    pub fn any_of(img: &RasterImage, colors: &[Rgb], tau: f64) -> Self {
        let t2 = tau * tau;
        let bits = img
            .pixels()
            .chunks_exact(3)
            .map(|px| {
                colors.iter().any(|c| {
                    (0..3).map(|k| (px[k] as f64 - c[k] as f64).powi(2)).sum::<f64>() <= t2
                })
            })
            .collect();
        InkMask { width: img.width(), height: img.height(), bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Out-of-bounds reads as false.
    pub fn at(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    /// Fraction of inked pixels in a clipped rectangle (0 if empty).
    pub fn coverage(&self, x0: isize, y0: isize, w: usize, h: usize) -> f64 {
        if w == 0 || h == 0 {
            return 0.0;
        }
        let mut n = 0;
        for y in y0..y0 + h as isize {
            for x in x0..x0 + w as isize {
                n += self.at(x, y) as usize;
            }
        }
        n as f64 / (w * h) as f64
    }
}

fn check_dims(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<(), ParseError> {
    let expected = spec.canvas_for(inst);
    let got = (img.width(), img.height());
    if expected != got {
        return Err(ParseError::OffGrid { expected, got });
    }
    Ok(())
}

/// Dispatch on the instance's kind.
pub fn parse(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<SymbolicSolution, ParseError> {
    Ok(match &inst.payload {
        Payload::Vsp(_) | Payload::Maze(_) => SymbolicSolution::Actions(parse_path(img, inst, spec)?),
        Payload::Tsp(_) => SymbolicSolution::Tour(parse_tour(img, inst, spec)?),
        Payload::Sudoku(_) => SymbolicSolution::SudokuGrid(parse_sudoku(img, inst, spec)?),
        Payload::Jigsaw(_) => SymbolicSolution::Permutation(parse_jigsaw(img, inst, spec)?.perm),
    })
}

/// Like [`parse`], but a low-confidence jigsaw assignment is an error
/// rather than an answer. Evaluation uses this reading.
pub fn parse_strict(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<SymbolicSolution, ParseError> {
    if let Payload::Jigsaw(_) = &inst.payload {
        let r = parse_jigsaw(img, inst, spec)?;
        if r.low_confidence {
            return Err(ParseError::LowConfidence(r.mean_cost.round() as u64));
        }
        return Ok(SymbolicSolution::Permutation(r.perm));
    }
    parse(img, inst, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{render_solution, RenderSpec};
    use crate::taskgen::generate;
    use crate::types::TaskKind;

    #[test]
    fn dispatch_round_trips_each_kind() {
        let spec = RenderSpec::default();
        for kind in TaskKind::ALL {
            let level = kind.levels()[0];
            let (inst, sol) = generate(kind, level, 5).unwrap();
            let img = render_solution(&inst, &sol, &spec).unwrap();
            assert_eq!(parse(&img, &inst, &spec).unwrap(), sol, "{kind}");
        }
    }

    #[test]
    fn wrong_dimensions_are_off_grid() {
        let spec = RenderSpec::default();
        for kind in TaskKind::ALL {
            let (inst, _) = generate(kind, kind.levels()[0], 5).unwrap();
            let img = RasterImage::filled(17, 9, [255; 3]);
            assert!(matches!(parse(&img, &inst, &spec), Err(ParseError::OffGrid { .. })), "{kind}");
        }
    }

    #[test]
    fn mask_tolerance() {
        let mut img = RasterImage::filled(2, 1, [255; 3]);
        img.put(1, 0, [220 + 30, 30 + 30, 30]);
        let m = InkMask::new(&img, [220, 30, 30], INK_TAU);
        assert!(!m.at(0, 0) && m.at(1, 0) && !m.at(2, 0) && !m.at(-1, 0));
    }
}
