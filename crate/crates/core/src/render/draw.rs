//! Integer-exact raster primitives. A pixel `(x, y)` is covered by a shape
//! when its center `(x + 0.5, y + 0.5)` is; there is no anti-aliasing.

use crate::types::{RasterImage, Rgb};

pub fn fill_rect(img: &mut RasterImage, x0: usize, y0: usize, w: usize, h: usize, color: Rgb) {
    let x1 = (x0 + w).min(img.width());
    let y1 = (y0 + h).min(img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            img.put(x, y, color);
        }
    }
}

fn bbox(img: &RasterImage, lo: f64, hi: f64, horizontal: bool) -> (usize, usize) {
    let limit = if horizontal { img.width() } else { img.height() };
    let a = (lo - 0.5).floor().max(0.0) as usize;
    let b = ((hi + 0.5).ceil().max(0.0) as usize).min(limit);
    (a, b)
}

pub fn fill_disk(img: &mut RasterImage, center: (f64, f64), radius: f64, color: Rgb) {
    let (cx, cy) = center;
    let (xa, xb) = bbox(img, cx - radius, cx + radius, true);
    let (ya, yb) = bbox(img, cy - radius, cy + radius, false);
    let r2 = radius * radius;
    for y in ya..yb {
        for x in xa..xb {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy <= r2 {
                img.put(x, y, color);
            }
        }
    }
}

/// Squared distance from `p` to the segment `a`–`b`.
pub fn segment_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 { 0.0 } else { ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0) };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    dx * dx + dy * dy
}

/// Stroke with round caps: every pixel within `half_width` of the segment.
pub fn thick_segment(img: &mut RasterImage, a: (f64, f64), b: (f64, f64), half_width: f64, color: Rgb) {
    let (xa, xb) = bbox(img, a.0.min(b.0) - half_width, a.0.max(b.0) + half_width, true);
    let (ya, yb) = bbox(img, a.1.min(b.1) - half_width, a.1.max(b.1) + half_width, false);
    let hw2 = half_width * half_width;
    for y in ya..yb {
        for x in xa..xb {
            if segment_dist2((x as f64 + 0.5, y as f64 + 0.5), a, b) <= hw2 {
                img.put(x, y, color);
            }
        }
    }
}

pub fn polyline(img: &mut RasterImage, points: &[(f64, f64)], half_width: f64, closed: bool, color: Rgb) {
    for w in points.windows(2) {
        thick_segment(img, w[0], w[1], half_width, color);
    }
    if closed && points.len() > 2 {
        thick_segment(img, points[points.len() - 1], points[0], half_width, color);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(img: &RasterImage, c: Rgb) -> usize {
        (0..img.height())
            .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) == c)
            .count()
    }

    #[test]
    fn horizontal_stroke_is_four_pixels_tall() {
        let mut img = RasterImage::filled(16, 16, [255; 3]);
        thick_segment(&mut img, (0.0, 8.0), (16.0, 8.0), 2.0, [1, 2, 3]);
        for x in 0..16 {
            let col: Vec<bool> = (0..16).map(|y| img.get(x, y) == [1, 2, 3]).collect();
            assert_eq!(col.iter().filter(|&&b| b).count(), 4);
            assert!(col[6] && col[7] && col[8] && col[9]);
        }
    }

    #[test]
    fn disk_is_symmetric() {
        let mut img = RasterImage::filled(16, 16, [0; 3]);
        fill_disk(&mut img, (8.0, 8.0), 4.0, [9; 3]);
        let n = count(&img, [9; 3]);
        assert!(n > 40 && n < 60, "{n}");
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(img.get(x, y), img.get(15 - x, y));
                assert_eq!(img.get(x, y), img.get(x, 15 - y));
            }
        }
    }

    #[test]
    fn shapes_clip_at_borders() {
        let mut img = RasterImage::filled(4, 4, [0; 3]);
        fill_disk(&mut img, (-1.0, -1.0), 3.0, [1; 3]);
        thick_segment(&mut img, (-10.0, 2.0), (20.0, 2.0), 0.5, [2; 3]);
        fill_rect(&mut img, 3, 3, 10, 10, [3; 3]);
        assert_eq!(img.get(3, 3), [3; 3]);
        assert_eq!(img.get(0, 1), [2; 3]);
    }
}
