use rand::Rng;

use super::{GenError, MAX_ATTEMPTS};
use crate::oracle::{dist, held_karp, MAX_CITIES, MIN_CITIES};
use crate::parse::tour::edge_samples;
use crate::render::draw::segment_dist2;
use crate::render::RenderSpec;
use crate::seed::split_rng;
use crate::types::{Level, Payload, SymbolicSolution, TaskInstance, TaskKind, TspPayload};

pub const MIN_SEPARATION: f64 = 0.04;

/// Whether the rendered optimal tour reads back unambiguously at the default
/// geometry: no other city disk sits on a tour edge's sample points, and no
/// non-tour pair runs along the ink for more than half its samples.
fn render_clear(cities: &[[f64; 2]], tour: &[usize]) -> bool {
    let spec = RenderSpec::default();
    let n = cities.len();
    let pt = |i: usize| spec.tsp_point(cities[i]);
    let mut on_tour = vec![vec![false; n]; n];
    let segs: Vec<_> = (0..n)
        .map(|k| {
            let (a, b) = (tour[k], tour[(k + 1) % n]);
            on_tour[a][b] = true;
            on_tour[b][a] = true;
            (pt(a), pt(b))
        })
        .collect();
    let disk2 = (spec.city_radius() + 1.5).powi(2);
    let ink2 = (spec.tour_half_width() + 1.5).powi(2);
    for i in 0..n {
        for j in i + 1..n {
            let samples = edge_samples(pt(i), pt(j), &spec);
            if on_tour[i][j] {
                let covered = samples
                    .iter()
                    .filter(|&&s| (0..n).any(|k| k != i && k != j && segment_dist2(s, pt(k), pt(k)) <= disk2))
                    .count();
                if covered > 0 {
                    return false;
                }
            } else {
                let inked = samples
                    .iter()
                    .filter(|&&s| segs.iter().any(|&(a, b)| segment_dist2(s, a, b) <= ink2))
                    .count();
                if inked > 4 {
                    return false;
                }
            }
        }
    }
    true
}

/// Uniform cities with a minimum separation, start city 0, Held–Karp tour.
pub fn gen_tsp(seed: u64, n: usize) -> Result<(TaskInstance, SymbolicSolution), GenError> {
    if !(MIN_CITIES..=MAX_CITIES).contains(&n) {
        return Err(GenError::InvalidLevel(format!("tsp city count {n}")));
    }
    let mut rng = split_rng(seed, "tsp");
    for _ in 0..MAX_ATTEMPTS {
        let mut cities: Vec<[f64; 2]> = Vec::with_capacity(n);
        let mut tries = 0;
        while cities.len() < n && tries < MAX_ATTEMPTS {
            tries += 1;
            let c = [rng.random::<f64>(), rng.random::<f64>()];
            if cities.iter().all(|&o| dist(o, c) >= MIN_SEPARATION) {
                cities.push(c);
            }
        }
        if cities.len() < n {
            continue;
        }
        let tour = held_karp(&cities, 0).expect("city count checked");
        if !render_clear(&cities, &tour) {
            continue;
        }
        let level = Level::Cities(n);
        let inst = TaskInstance {
            id: TaskInstance::make_id(TaskKind::Tsp, level, seed),
            kind: TaskKind::Tsp,
            level,
            seed,
            payload: Payload::Tsp(TspPayload { cities, start: 0 }),
        };
        return Ok((inst, SymbolicSolution::Tour(tour)));
    }
    Err(GenError::GenerationStuck { kind: TaskKind::Tsp, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::tour_length;

    fn brute_force(cities: &[[f64; 2]]) -> f64 {
        fn rec(cities: &[[f64; 2]], tour: &mut Vec<usize>, used: &mut [bool], best: &mut f64) {
            if tour.len() == cities.len() {
                *best = best.min(tour_length(cities, tour));
                return;
            }
            for i in 1..cities.len() {
                if !used[i] {
                    used[i] = true;
                    tour.push(i);
                    rec(cities, tour, used, best);
                    tour.pop();
                    used[i] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        let mut used = vec![false; cities.len()];
        used[0] = true;
        rec(cities, &mut vec![0], &mut used, &mut best);
        best
    }

    #[test]
    fn seven_cities_match_brute_force() {
        for seed in 0..10 {
            let (inst, sol) = gen_tsp(seed, 7).unwrap();
            let (Payload::Tsp(p), SymbolicSolution::Tour(t)) = (&inst.payload, &sol) else { unreachable!() };
            assert_eq!(t[0], 0);
            assert!((tour_length(&p.cities, t) - brute_force(&p.cities)).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_and_bounds() {
        let (inst, _) = gen_tsp(3, 18).unwrap();
        let Payload::Tsp(p) = &inst.payload else { unreachable!() };
        for (i, a) in p.cities.iter().enumerate() {
            assert!((0.0..1.0).contains(&a[0]) && (0.0..1.0).contains(&a[1]));
            for b in &p.cities[i + 1..] {
                assert!(dist(*a, *b) >= MIN_SEPARATION);
            }
        }
        assert!(matches!(gen_tsp(0, 2), Err(GenError::InvalidLevel(_))));
    }
}
