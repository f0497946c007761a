//! Procedural jigsaw source images: a smooth color field with one distinct
//! base hue per patch.

use rand::seq::SliceRandom;
use rand::Rng;

use super::RenderSpec;
use crate::seed::split_rng;
use crate::types::{JigsawPayload, RasterImage, Rgb};

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor() as u32 % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r * 255.0, g * 255.0, b * 255.0]
}

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: [f64; 3],
}

/// The unshuffled board image, `rows·patch` by `cols·patch` pixels.
pub fn jigsaw_source(p: &JigsawPayload, spec: &RenderSpec) -> RasterImage {
    let patch = spec.jigsaw_patch();
    let (w, h) = (p.cols * patch, p.rows * patch);
    let n = p.n();
    let mut rng = split_rng(p.texture_seed, "jigsaw-texture");

    // Evenly spaced hues, randomly assigned to patches, alternating value
    // bands so neighbors in hue still differ in brightness.
    let mut hue_slots: Vec<usize> = (0..n).collect();
    hue_slots.shuffle(&mut rng);
    let offset: f64 = rng.random();
    let bases: Vec<[f64; 3]> = hue_slots
        .iter()
        .map(|&k| {
            let hue = offset + k as f64 / n as f64;
            let sat = rng.random_range(0.55..0.85);
            let val = if k % 2 == 0 { rng.random_range(0.80..0.92) } else { rng.random_range(0.50..0.62) };
            hsv(hue, sat, val)
        })
        .collect();

    let waves: Vec<Wave> = (0..3)
        .map(|_| Wave {
            fx: rng.random_range(0.5..2.5) / w as f64,
            fy: rng.random_range(0.5..2.5) / h as f64,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            amp: [rng.random_range(8.0..22.0), rng.random_range(8.0..22.0), rng.random_range(8.0..22.0)],
        })
        .collect();

    let mut img = RasterImage::filled(w, h, [0; 3]);
    for y in 0..h {
        for x in 0..w {
            let k = (y / patch) * p.cols + x / patch;
            let mut c = bases[k];
            for wv in &waves {
                let s = (std::f64::consts::TAU * (wv.fx * x as f64 + wv.fy * y as f64) + wv.phase).sin();
                for ch in 0..3 {
                    c[ch] += wv.amp[ch] * s;
                }
            }
            let px: Rgb = c.map(|v| v.round().clamp(0.0, 255.0) as u8);
            img.put(x, y, px);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(img: &RasterImage) -> [f64; 3] {
        let mut m = [0.0; 3];
        for px in img.pixels().chunks_exact(3) {
            for c in 0..3 {
                m[c] += px[c] as f64;
            }
        }
        m.map(|v| v / (img.width() * img.height()) as f64)
    }

    #[test]
    fn deterministic_and_patch_means_differ() {
        let spec = RenderSpec::default();
        let p = JigsawPayload { rows: 4, cols: 4, shuffle: (0..16).collect(), texture_seed: 77 };
        let a = jigsaw_source(&p, &spec);
        assert_eq!(a, jigsaw_source(&p, &spec));
        let ps = spec.jigsaw_patch();
        let means: Vec<[f64; 3]> = (0..16)
            .map(|k| mean(&a.crop((k % 4) * ps, (k / 4) * ps, ps, ps)))
            .collect();
        for i in 0..16 {
            for j in i + 1..16 {
                let d2: f64 = (0..3).map(|c| (means[i][c] - means[j][c]).powi(2)).sum();
                assert!(d2 > 100.0, "patches {i} and {j} too similar ({d2})");
            }
        }
    }
}
