//! Exact TSP by Held–Karp dynamic programming.

use super::OracleError;

pub const MIN_CITIES: usize = 3;
pub const MAX_CITIES: usize = 20;

#[inline]
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closed-loop Euclidean length, summed edge by edge in tour order.
pub fn tour_length(cities: &[[f64; 2]], tour: &[usize]) -> f64 {
    let n = tour.len();
    (0..n).map(|i| dist(cities[tour[i]], cities[tour[(i + 1) % n]])).sum()
}

/// Rotate `tour` to begin at `start` and orient it toward the lower-indexed
/// neighbor of `start`. Returns `None` if `start` is absent.
pub fn canonical_tour(tour: &[usize], start: usize) -> Option<Vec<usize>> {
    let pos = tour.iter().position(|&c| c == start)?;
    let mut t: Vec<usize> = tour[pos..].iter().chain(&tour[..pos]).copied().collect();
    if t.len() > 2 && t[1] > t[t.len() - 1] {
        t[1..].reverse();
    }
    Some(t)
}

/// Minimum-length Hamiltonian cycle through all cities, in canonical
/// orientation from `start`.
pub fn held_karp(cities: &[[f64; 2]], start: usize) -> Result<Vec<usize>, OracleError> {
    let n = cities.len();
    if !(MIN_CITIES..=MAX_CITIES).contains(&n) {
        return Err(OracleError::CityCount(n));
    }
    if start >= n {
        return Err(OracleError::CityIndex(start));
    }
    // Relabel so the start city is node 0; node i (1..n) has bit i-1.
    let order: Vec<usize> = std::iter::once(start).chain((0..n).filter(|&c| c != start)).collect();
    let m = n - 1;
    let d: Vec<Vec<f64>> = order
        .iter()
        .map(|&a| order.iter().map(|&b| dist(cities[a], cities[b])).collect())
        .collect();

    let full = (1usize << m) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![u8::MAX; (full + 1) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = d[0][j + 1];
    }
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        let mut bits = mask;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let prev_mask = mask ^ (1 << j);
            let row = &cost[prev_mask * m..prev_mask * m + m];
            let mut best = f64::INFINITY;
            let mut arg = u8::MAX;
            let mut pb = prev_mask;
            while pb != 0 {
                let k = pb.trailing_zeros() as usize;
                pb &= pb - 1;
                let c = row[k] + d[k + 1][j + 1];
                if c < best {
                    best = c;
                    arg = k as u8;
                }
            }
            cost[mask * m + j] = best;
            parent[mask * m + j] = arg;
        }
    }

    let mut best = f64::INFINITY;
    let mut last = 0;
    for j in 0..m {
        let c = cost[full * m + j] + d[j + 1][0];
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = last;
    loop {
        rev.push(order[j + 1]);
        let p = parent[mask * m + j];
        mask ^= 1 << j;
        if mask == 0 {
            break;
        }
        j = p as usize;
    }
    rev.push(start);
    rev.reverse();
    Ok(canonical_tour(&rev, start).expect("start is in the tour"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_has_its_single_cycle() {
        let c = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let t = held_karp(&c, 0).unwrap();
        assert_eq!(t, vec![0, 1, 2]);
        assert!((tour_length(&c, &t) - 3.414214).abs() < 1e-6);
    }

    #[test]
    fn unit_square_is_its_perimeter() {
        let c = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let t = held_karp(&c, 0).unwrap();
        assert_eq!(tour_length(&c, &t), 4.0);
        assert_eq!(t, vec![0, 2, 1, 3]);
    }

    #[test]
    fn start_anywhere() {
        let c = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(held_karp(&c, 1).unwrap(), vec![1, 2, 0, 3]);
    }

    #[test]
    fn city_count_bounds() {
        assert_eq!(held_karp(&[[0.0, 0.0], [1.0, 1.0]], 0), Err(OracleError::CityCount(2)));
        assert_eq!(held_karp(&vec![[0.0, 0.0]; 21], 0), Err(OracleError::CityCount(21)));
        assert_eq!(held_karp(&[[0.0, 0.0], [1.0, 1.0], [0.5, 0.0]], 3), Err(OracleError::CityIndex(3)));
    }

    #[test]
    fn canonical_orientation() {
        assert_eq!(canonical_tour(&[2, 3, 0, 4, 1], 0), Some(vec![0, 3, 2, 1, 4]));
        assert_eq!(canonical_tour(&[2, 3, 4, 0, 1], 0), Some(vec![0, 1, 2, 3, 4]));
        assert_eq!(canonical_tour(&[0, 1, 2], 5), None);
    }
}
