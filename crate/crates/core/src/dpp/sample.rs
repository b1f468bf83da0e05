//! Exact k-DPP sampling.
//!
//! Phase one picks `k` eigenvectors of `L`, where eigenvector `n` is kept
//! with probability driven by the elementary symmetric polynomials of the
//! spectrum. Phase two samples items from the resulting projection DPP one at
//! a time by the chain rule, tracking each item's residual squared norm
//! against the span of the rows already chosen. That keeps the second phase
//! at O(N k²).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{greedy_map_select, DppError, EIGEN_FLOOR};
use crate::kernel::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DppSample {
    /// Sorted, distinct item indices.
    pub indices: Vec<usize>,
    pub seed: u64,
    /// True when the kernel's numerical rank was below `k` and greedy MAP
    /// selection stood in for sampling.
    pub fallback: bool,
}

/// Log-space elementary symmetric polynomials: `out[l][n] = ln e_l(λ_1..λ_n)`
/// for `l ≤ k`, `n ≤ N`.
pub fn elementary_symmetric(eigenvalues: &[f64], k: usize) -> Vec<Vec<f64>> {
    let n = eigenvalues.len();
    let mut e = vec![vec![f64::NEG_INFINITY; n + 1]; k + 1];
    e[0].iter_mut().for_each(|v| *v = 0.0);
    for l in 1..=k {
        for m in 1..=n {
            let ln_lambda = eigenvalues[m - 1].ln();
            e[l][m] = log_add_exp(e[l][m - 1], ln_lambda + e[l - 1][m - 1]);
        }
    }
    e
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Precomputed eigendecomposition for repeated k-DPP draws from one kernel.
#[derive(Debug, Clone)]
pub struct KDppSampler {
    k: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    log_esp: Vec<Vec<f64>>,
    rank: usize,
}

impl KDppSampler {
    pub fn new(kernel: &SimilarityMatrix, k: usize) -> Result<Self, DppError> {
        let n = kernel.n();
        if k == 0 || k > n {
            return Err(DppError::InvalidCardinality { k, n });
        }
        let eig = kernel.matrix().clone().symmetric_eigen();
        let eigenvalues: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&v| if v < EIGEN_FLOOR { 0.0 } else { v })
            .collect();
        let rank = eigenvalues.iter().filter(|&&v| v > 0.0).count();
        let log_esp = elementary_symmetric(&eigenvalues, k);
        Ok(Self {
            k,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            log_esp,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `ln e_k(λ)`, the log normalizer of the k-DPP.
    pub fn log_normalizer(&self) -> f64 {
        self.log_esp[self.k][self.eigenvalues.len()]
    }

    pub fn is_feasible(&self) -> bool {
        self.rank >= self.k
    }

    /// One exact draw. Callers must check [`Self::is_feasible`] first.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let chosen = self.select_eigenvectors(rng);
        self.sample_projection(&chosen, rng)
    }

    fn select_eigenvectors<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut remaining = self.k;
        let mut chosen = Vec::with_capacity(self.k);
        for m in (1..=self.eigenvalues.len()).rev() {
            if remaining == 0 {
                break;
            }
            let take = if m == remaining {
                true
            } else {
                let lam = self.eigenvalues[m - 1];
                if lam == 0.0 {
                    false
                } else {
                    let ln_p = lam.ln() + self.log_esp[remaining - 1][m - 1] - self.log_esp[remaining][m];
                    rng.gen::<f64>() < ln_p.exp()
                }
            };
            if take {
                chosen.push(m - 1);
                remaining -= 1;
            }
        }
        chosen
    }

    fn sample_projection<R: Rng + ?Sized>(&self, chosen: &[usize], rng: &mut R) -> Vec<usize> {
        let n = self.eigenvectors.nrows();
        let k = chosen.len();
        // rows[i] = i-th row of the N×k matrix of chosen eigenvectors
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| chosen.iter().map(|&c| self.eigenvectors[(i, c)]).collect())
            .collect();
        let mut residual: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut picked = Vec::with_capacity(k);
        for _ in 0..k {
            let total: f64 = residual.iter().map(|r| r.max(0.0)).sum();
            let mut u = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, r) in residual.iter().enumerate() {
                let w = r.max(0.0);
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if u < w {
                    break;
                }
                u -= w;
            }
            let i = pick.expect("projection DPP has positive residual mass");
            let mut q = rows[i].clone();
            for b in &basis {
                let proj: f64 = q.iter().zip(b).map(|(x, y)| x * y).sum();
                q.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            q.iter_mut().for_each(|x| *x /= norm);
            for (r, row) in residual.iter_mut().zip(&rows) {
                let proj: f64 = row.iter().zip(&q).map(|(x, y)| x * y).sum();
                *r -= proj * proj;
            }
            residual[i] = 0.0;
            basis.push(q);
            picked.push(i);
        }
        picked.sort_unstable();
        picked
    }
}

/// Exact k-DPP draw with `L = kernel`. Falls back to greedy MAP selection
/// (flagged) when the kernel's numerical rank is below `k`.
pub fn sample_k_dpp(kernel: &SimilarityMatrix, k: usize, seed: u64) -> Result<DppSample, DppError> {
    let sampler = KDppSampler::new(kernel, k)?;
    if !sampler.is_feasible() {
        let mut greedy = greedy_map_select(kernel, k)?;
        greedy.seed = seed;
        greedy.fallback = true;
        return Ok(greedy);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DppSample {
        indices: sampler.sample(&mut rng),
        seed,
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn esp_matches_direct_sums() {
        let lam = [0.5, 2.0, 3.0];
        let e = elementary_symmetric(&lam, 3);
        assert!((e[1][3].exp() - 5.5).abs() < 1e-12);
        assert!((e[2][3].exp() - (1.0 + 1.5 + 6.0)).abs() < 1e-12);
        assert!((e[3][3].exp() - 3.0).abs() < 1e-12);
        assert_eq!(e[2][1], f64::NEG_INFINITY);
    }

    #[test]
    fn k_equals_n_returns_everything() {
        let m = SimilarityMatrix::from_rows(3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        for seed in 0..20 {
            let s = sample_k_dpp(&m, 3, seed).unwrap();
            assert_eq!(s.indices, vec![0, 1, 2]);
            assert!(!s.fallback);
        }
    }

    #[test]
    fn identity_k1_is_uniform() {
        let n = 5;
        let m = SimilarityMatrix::identity(n);
        let sampler = KDppSampler::new(&m, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 10_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[sampler.sample(&mut rng)[0]] += 1;
        }
        let p = 1.0 / n as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{c}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let m = SimilarityMatrix::from_rows(3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0]).unwrap();
        let a: Vec<_> = (0..50).map(|s| sample_k_dpp(&m, 2, s).unwrap()).collect();
        let b: Vec<_> = (0..50).map(|s| sample_k_dpp(&m, 2, s).unwrap()).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|s| s.indices != a[0].indices));
    }

    #[test]
    fn rank_deficient_falls_back_to_greedy() {
        let ones = SimilarityMatrix::from_rows(3, &[1.0; 9]).unwrap();
        let s = sample_k_dpp(&ones, 2, 9).unwrap();
        assert!(s.fallback);
        assert_eq!(s.seed, 9);
        assert_eq!(s.indices, vec![0]);
    }

    #[test]
    fn invalid_cardinality() {
        let m = SimilarityMatrix::identity(3);
        assert!(matches!(sample_k_dpp(&m, 0, 0), Err(DppError::InvalidCardinality { .. })));
        assert!(matches!(sample_k_dpp(&m, 4, 0), Err(DppError::InvalidCardinality { .. })));
    }

    #[test]
    fn large_ground_set_does_not_overflow() {
        let n = 400;
        let m = SimilarityMatrix::from_matrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                0.5 * (-((i as f64 - j as f64).abs()) / 5.0).exp()
            }
        }))
        .unwrap();
        let sampler = KDppSampler::new(&m, 200).unwrap();
        assert!(sampler.log_normalizer().is_finite());
        let s = sampler.sample(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(s.len(), 200);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
