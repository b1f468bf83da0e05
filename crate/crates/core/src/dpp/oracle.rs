use std::collections::BTreeMap;

use itertools::Itertools;

use super::DppError;
use crate::kernel::SimilarityMatrix;

pub const MAX_ORACLE_ITEMS: usize = 15;

/// Exact k-DPP distribution by enumeration: `P(S) = det(L_S) / Σ det(L_S')`
/// over all k-subsets. Determinants come from LU, independent of the
/// Cholesky and eigen paths used elsewhere. Test oracle only.
pub fn brute_force_k_dpp_probs(
    kernel: &SimilarityMatrix,
    k: usize,
) -> Result<BTreeMap<Vec<usize>, f64>, DppError> {
    let n = kernel.n();
    if n > MAX_ORACLE_ITEMS {
        return Err(DppError::TooLarge { n, max: MAX_ORACLE_ITEMS });
    }
    if k == 0 || k > n {
        return Err(DppError::InvalidCardinality { k, n });
    }
    let dets: Vec<(Vec<usize>, f64)> = (0..n)
        .combinations(k)
        .map(|s| {
            let d = kernel.principal(&s).into_matrix().lu().determinant().max(0.0);
            (s, d)
        })
        .collect();
    let total: f64 = dets.iter().map(|(_, d)| d).sum();
    if total <= 0.0 {
        return Err(DppError::Singular);
    }
    Ok(dets.into_iter().map(|(s, d)| (s, d / total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_uniform() {
        let p = brute_force_k_dpp_probs(&SimilarityMatrix::identity(3), 2).unwrap();
        assert_eq!(p.len(), 3);
        for v in p.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn near_duplicates_least_likely() {
        let m = SimilarityMatrix::from_rows(3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = brute_force_k_dpp_probs(&m, 2).unwrap();
        assert!((p[&vec![0, 1]] - 0.19 / 2.19).abs() < 1e-12);
        assert!((p[&vec![0, 2]] - 1.0 / 2.19).abs() < 1e-12);
        assert!((p[&vec![1, 2]] - 1.0 / 2.19).abs() < 1e-12);
        assert!((p[&vec![0, 1]] - 0.0868).abs() < 1e-4);
        assert!((p[&vec![0, 2]] - 0.4566).abs() < 1e-4);
        let min = p.iter().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(min.0, &vec![0, 1]);
        assert!(p.iter().filter(|(s, _)| *s != &vec![0, 1]).all(|(_, v)| *v > p[&vec![0, 1]]));
        assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_and_guards() {
        let m = SimilarityMatrix::from_rows(2, &[1.0, 0.3, 0.3, 1.0]).unwrap();
        let p = brute_force_k_dpp_probs(&m, 2).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[&vec![0, 1]], 1.0);
        assert!(matches!(
            brute_force_k_dpp_probs(&SimilarityMatrix::identity(16), 2),
            Err(DppError::TooLarge { .. })
        ));
    }
}
