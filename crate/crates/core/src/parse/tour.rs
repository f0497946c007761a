use super::{check_dims, InkMask, ParseError, INK_TAU};
use crate::oracle::canonical_tour;
use crate::render::RenderSpec;
use crate::types::{Payload, RasterImage, TaskInstance};

pub const EDGE_SAMPLES: usize = 9;
pub const EDGE_MIN_HITS: usize = 7;

/// Radius around each city center excluded from edge sampling.
pub fn exclusion_radius(spec: &RenderSpec) -> f64 {
    6.0 * spec.cell_px as f64 / 16.0
}

/// Evenly spaced probe points on the open segment between two city centers,
/// after trimming the exclusion disks at both ends.
pub fn edge_samples(a: (f64, f64), b: (f64, f64), spec: &RenderSpec) -> Vec<(f64, f64)> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    let r = exclusion_radius(spec).min(len / 2.0);
    let (ux, uy) = if len > 0.0 { (dx / len, dy / len) } else { (0.0, 0.0) };
    let (sx, sy) = (a.0 + r * ux, a.1 + r * uy);
    let span = len - 2.0 * r;
    (1..=EDGE_SAMPLES)
        .map(|k| {
            let f = span * k as f64 / (EDGE_SAMPLES + 1) as f64;
            (sx + f * ux, sy + f * uy)
        })
        .collect()
}

/// Read a closed tour from an answer image, starting at the start city and
/// heading to its lower-indexed neighbor.
pub fn parse_tour(img: &RasterImage, inst: &TaskInstance, spec: &RenderSpec) -> Result<Vec<usize>, ParseError> {
    check_dims(img, inst, spec)?;
    let Payload::Tsp(p) = &inst.payload else { unreachable!("dispatch guarantees a tsp payload") };
    let mask = InkMask::new(img, spec.palette.solution_ink, INK_TAU);
    let n = p.cities.len();
    let pts: Vec<_> = p.cities.iter().map(|&c| spec.tsp_point(c)).collect();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let hits = edge_samples(pts[i], pts[j], spec)
                .into_iter()
                .filter(|&(x, y)| mask.at(x.floor() as isize, y.floor() as isize))
                .count();
            if hits >= EDGE_MIN_HITS {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    if let Some(city) = (0..n).find(|&c| adj[c].len() != 2) {
        return Err(ParseError::DegreeViolation { city, degree: adj[city].len() });
    }
    let mut tour = vec![p.start];
    let (mut prev, mut cur) = (p.start, adj[p.start][0]);
    while cur != p.start {
        tour.push(cur);
        let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
        (prev, cur) = (cur, next);
    }
    if tour.len() != n {
        return Err(ParseError::NotACycle);
    }
    Ok(canonical_tour(&tour, p.start).expect("a walked cycle is a permutation"))
}
