use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DppError, GAIN_FLOOR};
use crate::kernel::{DataInstance, Kernel, KernelItem, SimilarityMatrix};

/// Volume gain `det(S ∪ {w}) / det(S)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginalGain(pub f64);

impl MarginalGain {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Fixed-capacity anchor set with its kernel and a cached lower Cholesky
/// factor, both stored packed by rows (row `i` holds `i + 1` entries).
///
/// States are immutable: [`AnchorState::extend`] returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorState<T = DataInstance> {
    items: Vec<T>,
    kernel: Vec<f64>,
    chol: Vec<f64>,
    logdet: f64,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl<T> Default for AnchorState<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T> AnchorState<T> {
    pub fn empty() -> Self {
        Self {
            items: Vec::new(),
            kernel: Vec::new(),
            chol: Vec::new(),
            logdet: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Factorizes an explicit kernel over `items` from scratch.
    pub fn from_kernel(items: Vec<T>, kernel: &SimilarityMatrix) -> Result<Self, DppError>
    where
        T: Clone,
    {
        let m = items.len();
        if kernel.n() != m {
            return Err(DppError::LengthMismatch { expected: m, got: kernel.n() });
        }
        let mut state = Self::empty();
        for (i, item) in items.into_iter().enumerate() {
            let sims: Vec<f64> = (0..i).map(|j| kernel.get(i, j)).collect();
            state = state.extend(item, &sims, kernel.get(i, i))?;
        }
        Ok(state)
    }

    fn check_len(&self, sims: &[f64]) -> Result<(), DppError> {
        if sims.len() != self.len() {
            return Err(DppError::LengthMismatch { expected: self.len(), got: sims.len() });
        }
        Ok(())
    }

    /// Forward substitution `L y = c` against the cached factor, O(m²).
    fn forward_solve(&self, sims: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            let row = &self.chol[row_start(i)..row_start(i) + i + 1];
            let acc: f64 = row[..i].iter().zip(&y).map(|(l, yj)| l * yj).sum();
            y.push((sims[i] - acc) / row[i]);
        }
        y
    }

    fn schur(&self, sims: &[f64], self_sim: f64) -> Result<(Vec<f64>, f64), DppError> {
        self.check_len(sims)?;
        let y = self.forward_solve(sims);
        let gamma = self_sim - y.iter().map(|v| v * v).sum::<f64>();
        if gamma < -1e-9 {
            return Err(DppError::NegativeGain(gamma));
        }
        Ok((y, gamma.clamp(0.0, self_sim)))
    }

    /// Schur complement `k(w,w) - cᵀ S⁻¹ c` for a candidate with similarity
    /// vector `sims` against the anchor items.
    pub fn gain(&self, sims: &[f64], self_sim: f64) -> Result<MarginalGain, DppError> {
        self.schur(sims, self_sim).map(|(_, g)| MarginalGain(g))
    }

    /// Appends `item`, extending the factor by one row.
    pub fn extend(&self, item: T, sims: &[f64], self_sim: f64) -> Result<Self, DppError>
    where
        T: Clone,
    {
        let (row, gamma) = self.schur(sims, self_sim)?;
        if gamma <= GAIN_FLOOR {
            return Err(DppError::DegenerateExtension(gamma));
        }
        let mut items = self.items.clone();
        items.push(item);
        let mut kernel = self.kernel.clone();
        kernel.extend_from_slice(sims);
        kernel.push(self_sim);
        let mut chol = self.chol.clone();
        chol.extend_from_slice(&row);
        chol.push(gamma.sqrt());
        Ok(Self {
            items,
            kernel,
            chol,
            logdet: self.logdet + gamma.ln(),
        })
    }

    /// Sub-state on `indices` (refactorized, O(k³)).
    pub fn select(&self, indices: &[usize]) -> Result<Self, DppError>
    where
        T: Clone,
    {
        let kernel = self.kernel_matrix().principal(indices);
        let items = indices.iter().map(|&i| self.items[i].clone()).collect();
        Self::from_kernel(items, &kernel)
    }

    pub fn kernel_matrix(&self) -> SimilarityMatrix {
        let m = self.len();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = self.kernel[row_start(i) + j];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SimilarityMatrix::from_matrix(out).expect("anchor kernel is symmetric by construction")
    }

    /// Packed kernel and factor rows, for exact persistence.
    pub fn packed(&self) -> (&[f64], &[f64]) {
        (&self.kernel, &self.chol)
    }

    /// Rebuilds a state from [`AnchorState::packed`] output without
    /// refactorizing.
    pub fn from_packed(items: Vec<T>, kernel: Vec<f64>, chol: Vec<f64>, logdet: f64) -> Result<Self, DppError> {
        let need = row_start(items.len());
        if kernel.len() != need || chol.len() != need {
            return Err(DppError::LengthMismatch { expected: need, got: kernel.len().max(chol.len()) });
        }
        if (0..items.len()).any(|i| chol[row_start(i) + i].is_nan() || chol[row_start(i) + i] <= 0.0) {
            return Err(DppError::Singular);
        }
        Ok(Self { items, kernel, chol, logdet })
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        let m = self.len();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                out[(i, j)] = self.chol[row_start(i) + j];
            }
        }
        out
    }
}

impl<T: KernelItem> AnchorState<T> {
    pub fn similarities(&self, w: &T, kernel: &Kernel) -> Result<Vec<f64>, DppError> {
        Ok(kernel.similarities(w, &self.items)?)
    }
}

pub fn marginal_gain<T: KernelItem>(
    w: &T,
    anchor: &AnchorState<T>,
    kernel: &Kernel,
) -> Result<MarginalGain, DppError> {
    let sims = anchor.similarities(w, kernel)?;
    anchor.gain(&sims, kernel.self_similarity())
}

pub fn extend_anchor<T: KernelItem + Clone>(
    anchor: &AnchorState<T>,
    w: T,
    kernel: &Kernel,
) -> Result<AnchorState<T>, DppError> {
    let sims = anchor.similarities(&w, kernel)?;
    anchor.extend(w, &sims, kernel.self_similarity())
}
