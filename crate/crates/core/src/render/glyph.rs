//! 5×7 bitmap digits.

use super::draw::fill_rect;
use crate::types::{RasterImage, Rgb};

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// Row bitmaps, most significant of the low five bits is the leftmost pixel.
pub const DIGITS: [[u8; GLYPH_H]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x14, 0x04, 0x04, 0x04, 0x1F],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

/// A glyph as a 35-bit mask, row-major from the top-left.
pub fn glyph_bits(digit: u8) -> u64 {
    let mut bits = 0u64;
    for (r, row) in DIGITS[digit as usize].iter().enumerate() {
        for c in 0..GLYPH_W {
            if row >> (GLYPH_W - 1 - c) & 1 == 1 {
                bits |= 1 << (r * GLYPH_W + c);
            }
        }
    }
    bits
}

/// Draw `digit` with its top-left at `(x0, y0)`, each bit a `scale`×`scale` block.
pub fn draw_digit(img: &mut RasterImage, digit: u8, x0: usize, y0: usize, scale: usize, color: Rgb) {
    for (r, row) in DIGITS[digit as usize].iter().enumerate() {
        for c in 0..GLYPH_W {
            if row >> (GLYPH_W - 1 - c) & 1 == 1 {
                fill_rect(img, x0 + c * scale, y0 + r * scale, scale, scale, color);
            }
        }
    }
}

/// Draw a decimal number at scale 1, digits separated by one pixel.
pub fn draw_number(img: &mut RasterImage, value: usize, x0: usize, y0: usize, color: Rgb) {
    let text = value.to_string();
    for (i, ch) in text.bytes().enumerate() {
        draw_digit(img, ch - b'0', x0 + i * (GLYPH_W + 1), y0, 1, color);
    }
}

pub fn number_width(value: usize) -> usize {
    let n = value.to_string().len();
    n * GLYPH_W + (n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_well_separated() {
        for a in 0..10u8 {
            assert!(glyph_bits(a).count_ones() >= 11, "digit {a} too sparse");
            for b in a + 1..10 {
                let d = (glyph_bits(a) ^ glyph_bits(b)).count_ones();
                assert!(d >= 5, "digits {a} and {b} differ in only {d} bits");
            }
        }
    }

    #[test]
    fn drawn_digit_matches_bits() {
        let mut img = RasterImage::filled(10, 14, [255; 3]);
        draw_digit(&mut img, 7, 0, 0, 2, [0; 3]);
        let bits = glyph_bits(7);
        for r in 0..GLYPH_H {
            for c in 0..GLYPH_W {
                let on = bits >> (r * GLYPH_W + c) & 1 == 1;
                assert_eq!(img.get(2 * c + 1, 2 * r + 1) == [0; 3], on);
            }
        }
    }

    #[test]
    fn two_digit_numbers_fit_a_label_box() {
        assert_eq!(number_width(7), 5);
        assert_eq!(number_width(15), 11);
    }
}
