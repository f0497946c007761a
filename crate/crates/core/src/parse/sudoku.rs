use super::{check_dims, InkMask, ParseError, INK_TAU};
use crate::render::glyph::{glyph_bits, GLYPH_H, GLYPH_W};
use crate::render::RenderSpec;
use crate::types::{Payload, RasterImage, TaskInstance};

/// Largest accepted Hamming distance to the nearest glyph.
pub const GLYPH_SLACK: u32 = 10;

/// 5×7 bitmap read from the glyph box of cell `i`: a block is on when most
/// of its pixels are clue or solution ink.
fn read_bits(mask: &InkMask, i: usize, spec: &RenderSpec) -> u64 {
    let s = spec.glyph_scale();
    let (x0, y0) = spec.sudoku_glyph_origin(i);
    let mut bits = 0u64;
    for r in 0..GLYPH_H {
        for c in 0..GLYPH_W {
            let cov = mask.coverage((x0 + c * s) as isize, (y0 + r * s) as isize, s, s);
            if cov > 0.5 {
                bits |= 1 << (r * GLYPH_W + c);
            }
        }
    }
    bits
}

/// Nearest digit 1..9 and its distance; ties go to the smaller digit.
fn classify(bits: u64) -> (u8, u32) {
    (1..=9u8)
        .map(|d| (d, (glyph_bits(d) ^ bits).count_ones()))
        .min_by_key(|&(d, h)| (h, d))
        .expect("nine candidates")
}

pub fn parse_sudoku(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<Vec<u8>, ParseError> {
    check_dims(img, inst, spec)?;
    let Payload::Sudoku(p) = &inst.payload else { unreachable!("dispatch guarantees a sudoku payload") };
    let mask = InkMask::any_of(img, &[spec.palette.clue_ink, spec.palette.solution_ink], INK_TAU);
    let mut out = Vec::with_capacity(81);
    for i in 0..81 {
        let (digit, dist) = classify(read_bits(&mask, i, spec));
        let given = p.givens[i];
        if given != 0 {
            if dist > GLYPH_SLACK || digit != given {
                return Err(ParseError::GivenMismatch(i));
            }
        } else if dist > GLYPH_SLACK {
            return Err(ParseError::IllegibleCell(i));
        }
        out.push(digit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{glyph::draw_digit, render_instance, render_solution};
    use crate::taskgen::gen_sudoku;
    use crate::types::SymbolicSolution;

    #[test]
    fn round_trip() {
        let spec = RenderSpec::default();
        for seed in 0..5 {
            let (inst, sol) = gen_sudoku(seed, 35).unwrap();
            let img = render_solution(&inst, &sol, &spec).unwrap();
            assert_eq!(SymbolicSolution::SudokuGrid(parse_sudoku(&img, &inst, &spec).unwrap()), sol);
        }
    }

    #[test]
    fn blank_cell_is_illegible() {
        let spec = RenderSpec::default();
        let (inst, _) = gen_sudoku(1, 40).unwrap();
        let Payload::Sudoku(p) = &inst.payload else { unreachable!() };
        let first_blank = p.givens.iter().position(|&d| d == 0).unwrap();
        assert_eq!(
            parse_sudoku(&render_instance(&inst, &spec), &inst, &spec),
            Err(ParseError::IllegibleCell(first_blank))
        );
    }

    #[test]
    fn repainted_given_mismatches() {
        let spec = RenderSpec::default();
        let (inst, sol) = gen_sudoku(2, 45).unwrap();
        let Payload::Sudoku(p) = &inst.payload else { unreachable!() };
        let mut img = render_solution(&inst, &sol, &spec).unwrap();
        let g = p.givens.iter().position(|&d| d != 0).unwrap();
        let wrong = if p.givens[g] == 8 { 1 } else { 8 };
        let (x, y) = spec.sudoku_glyph_origin(g);
        let sc = spec.sudoku_cell();
        crate::render::draw::fill_rect(&mut img, (g % 9) * sc + 3, (g / 9) * sc + 3, sc - 6, sc - 6, spec.palette.background);
        draw_digit(&mut img, wrong, x, y, spec.glyph_scale(), spec.palette.solution_ink);
        assert_eq!(parse_sudoku(&img, &inst, &spec), Err(ParseError::GivenMismatch(g)));
    }
}
