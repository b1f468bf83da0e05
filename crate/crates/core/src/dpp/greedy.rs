use super::{DppError, DppSample, GAIN_FLOOR};
use crate::kernel::SimilarityMatrix;

/// Greedy volume maximization: repeatedly add the item with the largest
/// Schur-complement gain against the current selection. Lowest index wins
/// ties. Stops early when every remaining gain is at or below the floor.
///
/// Incremental Cholesky per candidate keeps this at O(N k²).
pub fn greedy_map_select(kernel: &SimilarityMatrix, k: usize) -> Result<DppSample, DppError> {
    let n = kernel.n();
    if k == 0 || k > n {
        return Err(DppError::InvalidCardinality { k, n });
    }
    let mut gains: Vec<f64> = (0..n).map(|i| kernel.get(i, i)).collect();
    let mut coeffs: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(k);

    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, &g) in gains.iter().enumerate() {
            if !taken[i] && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
        let Some((j, gj)) = best else { break };
        if gj <= GAIN_FLOOR {
            break;
        }
        taken[j] = true;
        selected.push(j);
        let dj = gj.sqrt();
        let cj = coeffs[j].clone();
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let dot: f64 = cj.iter().zip(&coeffs[i]).map(|(a, b)| a * b).sum();
            let e = (kernel.get(j, i) - dot) / dj;
            coeffs[i].push(e);
            gains[i] -= e * e;
        }
    }
    selected.sort_unstable();
    Ok(DppSample {
        indices: selected,
        seed: 0,
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ties_break_low() {
        let s = greedy_map_select(&SimilarityMatrix::identity(4), 2).unwrap();
        assert_eq!(s.indices, vec![0, 1]);
    }

    #[test]
    fn avoids_near_duplicates() {
        let m = SimilarityMatrix::from_rows(3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(greedy_map_select(&m, 2).unwrap().indices, vec![0, 2]);
    }

    #[test]
    fn never_picks_both_duplicates() {
        // items 1 and 3 are exact duplicates
        let m = SimilarityMatrix::from_rows(
            4,
            &[
                1.0, 0.2, 0.1, 0.2, //
                0.2, 1.0, 0.3, 1.0, //
                0.1, 0.3, 1.0, 0.3, //
                0.2, 1.0, 0.3, 1.0,
            ],
        )
        .unwrap();
        let s = greedy_map_select(&m, 3).unwrap();
        assert_eq!(s.indices.len(), 3);
        assert!(!(s.indices.contains(&1) && s.indices.contains(&3)));
        // asking for all four stops at the rank
        assert_eq!(greedy_map_select(&m, 4).unwrap().indices.len(), 3);
    }
}
