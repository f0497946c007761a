use super::{assign_min_cost, check_dims, ParseError};
use crate::render::{jigsaw_source, RenderSpec};
use crate::types::{Payload, RasterImage, TaskInstance};

/// Mean assigned cost (per pixel channel) above which a reading is flagged.
pub const LOW_CONFIDENCE_COST: f64 = 1500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct JigsawParse {
    /// For each board position, the label of the patch placed there.
    pub perm: Vec<usize>,
    pub mean_cost: f64,
    pub low_confidence: bool,
}

fn patch_mse(a: &RasterImage, ax: usize, ay: usize, b: &RasterImage, bx: usize, by: usize, side: usize, skip: usize) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..side {
        for x in 0..side {
            if x < skip && y < skip {
                continue;
            }
            let (p, q) = (a.get(ax + x, ay + y), b.get(bx + x, by + y));
            for k in 0..3 {
                let d = p[k] as f64 - q[k] as f64;
                sum += d * d;
            }
            n += 3;
        }
    }
    sum / n as f64
}

/// Match every board position to the true patch it most resembles (exact
/// minimum-cost assignment), then report each position's patch by label.
pub fn parse_jigsaw(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<JigsawParse, ParseError> {
    check_dims(img, inst, spec)?;
    let Payload::Jigsaw(p) = &inst.payload else { unreachable!("dispatch guarantees a jigsaw payload") };
    let src = jigsaw_source(p, spec);
    let side = spec.jigsaw_patch();
    let skip = spec.label_box();
    let n = p.n();
    let at = |k: usize| ((k % p.cols) * side, (k / p.cols) * side);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|slot| {
            let (sx, sy) = at(slot);
            (0..n)
                .map(|patch| {
                    let (px, py) = at(patch);
                    patch_mse(img, sx, sy, &src, px, py, side, skip)
                })
                .collect()
        })
        .collect();
    let assignment = assign_min_cost(&cost);
    let mean_cost = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>() / n as f64;
    let labels = p.labels();
    Ok(JigsawParse {
        perm: assignment.iter().map(|&patch| labels[patch]).collect(),
        mean_cost,
        low_confidence: mean_cost > LOW_CONFIDENCE_COST,
    })
}
