//! Partial-credit rewards for each answer family, reported next to binary
//! accuracy.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::oracle::tour_length;
use crate::types::Move;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewardError {
    #[error("ground-truth action sequence is empty")]
    EmptyGroundTruth,
    #[error("city index {0} out of range")]
    IndexOutOfRange(usize),
}

/// Length tolerance for comparing tour lengths.
pub const TOUR_EPS: f64 = 1e-4;

/// Longest agreeing prefix of `predicted` and `truth`, over `|truth|`.
pub fn r_plan(predicted: &[Move], truth: &[Move]) -> Result<f64, RewardError> {
    if truth.is_empty() {
        return Err(RewardError::EmptyGroundTruth);
    }
    let k = predicted.iter().zip(truth).take_while(|(p, g)| p == g).count();
    Ok(k as f64 / truth.len() as f64)
}

/// 0 if the visited city sets differ, 0.5 if they match, 1.0 if the closed
/// tour lengths also agree within [`TOUR_EPS`].
pub fn r_tsp(predicted: &[usize], truth: &[usize], cities: &[[f64; 2]]) -> Result<f64, RewardError> {
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&i| i >= cities.len()) {
        return Err(RewardError::IndexOutOfRange(bad));
    }
    let sp: BTreeSet<usize> = predicted.iter().copied().collect();
    let sg: BTreeSet<usize> = truth.iter().copied().collect();
    if sp != sg {
        return Ok(0.0);
    }
    let same_len = (tour_length(cities, predicted) - tour_length(cities, truth)).abs() < TOUR_EPS;
    Ok(0.5 * (1.0 + f64::from(u8::from(same_len))))
}

/// Cell-wise accuracy, gated on a full 81-digit answer.
pub fn r_sudoku(predicted: &[u8], truth: &[u8]) -> f64 {
    if predicted.len() != 81 {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, g)| p == g).count();
    hits as f64 / 81.0
}

/// Fraction of slots holding the right patch, gated on `|predicted| = n`.
pub fn r_jigsaw(predicted: &[usize], truth: &[usize], n: usize) -> f64 {
    if predicted.len() != n || n == 0 {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, g)| p == g).count();
    hits as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use Move::*;

    #[test]
    fn plan_prefix_cases() {
        assert_eq!(r_plan(&[R, D, R, D, L], &[R, D, R, D, L]), Ok(1.0));
        assert_eq!(r_plan(&[R, D, D], &[R, D, L, L]), Ok(0.5));
        assert_eq!(r_plan(&[], &[R, D]), Ok(0.0));
        assert_eq!(r_plan(&[R, D, D, D, D, D], &[R, D]), Ok(1.0));
        assert_eq!(r_plan(&[R], &[]), Err(RewardError::EmptyGroundTruth));
    }

    #[test]
    fn tsp_tiers() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(r_tsp(&[0, 1, 2, 3], &[0, 1, 2, 3], &sq), Ok(1.0));
        // reversal: same set, same length
        assert_eq!(r_tsp(&[0, 3, 2, 1], &[0, 1, 2, 3], &sq), Ok(1.0));
        // crossing tour: same set, longer
        assert_eq!(r_tsp(&[0, 2, 1, 3], &[0, 1, 2, 3], &sq), Ok(0.5));
        assert_eq!(r_tsp(&[0, 1, 2], &[0, 1, 2, 3], &sq), Ok(0.0));
        assert_eq!(r_tsp(&[0, 1, 9], &[0, 1, 2, 3], &sq), Err(RewardError::IndexOutOfRange(9)));
    }

    #[test]
    fn tsp_length_gate_is_strict_epsilon() {
        // Longer by exactly 0.5: set match only.
        let line = [[0.0, 0.0], [0.5, 0.0], [0.25, 0.0]];
        // [0,2,1] closed length = 0.25+0.25+0.5 = 1.0 ; [0,1,2] = 0.5+0.25+0.25 = 1.0
        assert_eq!(r_tsp(&[0, 1, 2], &[0, 2, 1], &line), Ok(1.0));
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        // square perimeter 4 vs bow-tie 2+2√2 (longer by 2√2−2 ≈ 0.83)
        assert_eq!(r_tsp(&[0, 1, 2, 3], &[0, 1, 3, 2], &pts), Ok(0.5));
    }

    #[test]
    fn sudoku_cases() {
        let g: Vec<u8> = (0..81).map(|i| (i % 9 + 1) as u8).collect();
        assert_eq!(r_sudoku(&g, &g), 1.0);
        let mut one_off = g.clone();
        one_off[40] = if g[40] == 1 { 2 } else { 1 };
        assert!((r_sudoku(&one_off, &g) - 80.0 / 81.0).abs() < 1e-15);
        assert!((r_sudoku(&one_off, &g) - 0.987654).abs() < 1e-6);
        assert_eq!(r_sudoku(&g[..80], &g), 0.0);
    }

    #[test]
    fn jigsaw_cases() {
        assert_eq!(r_jigsaw(&[0, 1, 2, 3], &[0, 1, 2, 3], 4), 1.0);
        assert_eq!(r_jigsaw(&[1, 0, 2, 3], &[0, 1, 2, 3], 4), 0.5);
        assert_eq!(r_jigsaw(&[0, 1, 2], &[0, 1, 2, 3], 4), 0.0);
    }
}
