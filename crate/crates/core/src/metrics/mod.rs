//! Diversity and quality measurement.
//!
//! The Vendi score is the exponential of the Shannon entropy of the
//! trace-normalized kernel spectrum. `effective_rank_approx` is the
//! determinant-based approximation `n² D^(1/n) / C`, which agrees with Vendi
//! to second order around a flat spectrum.

mod judge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::LedgerSnapshot;
use crate::kernel::{build_kernel, jaccard_similarity, DataInstance, Kernel, KernelError, SimilarityMatrix};

pub use judge::{judge_quality, parse_score, QualityReport, Rubric};

/// Eigenvalues below this count as exactly zero in the entropy sum.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("kernel is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("need at least {need} items, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("kernel trace is zero")]
    ZeroTrace,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("judge panel is empty")]
    EmptyPanel,
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Non-increasing, clamped to be non-negative.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    pub normalized: Vec<f64>,
}

pub fn spectrum(kernel: &SimilarityMatrix) -> Result<SpectrumSummary, MetricsError> {
    if kernel.n() == 0 {
        return Err(MetricsError::TooFew { need: 1, got: 0 });
    }
    let raw = kernel.matrix().clone().symmetric_eigenvalues();
    let mut eigenvalues = Vec::with_capacity(raw.len());
    for &v in raw.iter() {
        if v < -1e-9 {
            return Err(MetricsError::NotPsd(v));
        }
        eigenvalues.push(if v < SPECTRUM_FLOOR { 0.0 } else { v });
    }
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let trace: f64 = eigenvalues.iter().sum();
    if trace <= 0.0 {
        return Err(MetricsError::ZeroTrace);
    }
    let normalized = eigenvalues.iter().map(|v| v / trace).collect();
    Ok(SpectrumSummary {
        eigenvalues,
        trace,
        normalized,
    })
}

pub fn vendi_score(kernel: &SimilarityMatrix) -> Result<f64, MetricsError> {
    let s = spectrum(kernel)?;
    let h: f64 = s
        .normalized
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(h.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRank {
    pub value: f64,
    /// Set when the determinant is zero and the approximation collapses.
    pub degenerate: bool,
}

/// `n² · det^(1/n) / trace`, in log space.
pub fn effective_rank_approx(kernel: &SimilarityMatrix) -> Result<EffectiveRank, MetricsError> {
    let n = kernel.n();
    if n == 0 {
        return Err(MetricsError::TooFew { need: 1, got: 0 });
    }
    let trace = kernel.trace();
    if trace <= 0.0 {
        return Err(MetricsError::ZeroTrace);
    }
    let logdet = match crate::dpp::log_det(kernel) {
        Ok(v) => v,
        Err(_) => {
            return Ok(EffectiveRank {
                value: 0.0,
                degenerate: true,
            })
        }
    };
    let nf = n as f64;
    Ok(EffectiveRank {
        value: (2.0 * nf.ln() + logdet / nf - trace.ln()).exp(),
        degenerate: false,
    })
}

/// `n² · G_p`, the same quantity written through the geometric mean of the
/// normalized spectrum. Zero if any eigenvalue vanishes.
pub fn spectral_flatness_rank(s: &SpectrumSummary) -> f64 {
    let n = s.normalized.len() as f64;
    if s.normalized.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let ln_g = s.normalized.iter().map(|p| p.ln()).sum::<f64>() / n;
    n * n * ln_g.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

fn pairwise<F>(items: &[DataInstance], mut f: F) -> Result<MeanStd, MetricsError>
where
    F: FnMut(&DataInstance, &DataInstance) -> Result<f64, MetricsError>,
{
    if items.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: items.len() });
    }
    let mut vals = Vec::with_capacity(items.len() * (items.len() - 1) / 2);
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            vals.push(f(a, b)?);
        }
    }
    Ok(MeanStd::of(&vals).expect("at least one pair"))
}

pub fn mean_pairwise_cosine_distance(items: &[DataInstance]) -> Result<MeanStd, MetricsError> {
    pairwise(items, |a, b| {
        let cos = a.embedding.dot(&b.embedding)?;
        Ok((1.0 - cos).clamp(0.0, 2.0))
    })
}

pub fn mean_pairwise_jaccard_distance(items: &[DataInstance]) -> Result<MeanStd, MetricsError> {
    pairwise(items, |a, b| Ok(1.0 - jaccard_similarity(&a.token_set, &b.token_set)))
}

/// Which kernel the Vendi score is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VendiKernel {
    /// Same RBF + Jaccard combination as generation.
    #[default]
    Combined,
    EmbeddingOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub method: String,
    pub n: usize,
    pub lexical: MeanStd,
    pub cosine: MeanStd,
    pub vendi: f64,
    pub effective_rank_approx: f64,
    pub effective_rank_degenerate: bool,
    pub vendi_kernel: VendiKernel,
    pub rbf_bandwidth: f64,
    pub w_rbf: f64,
    pub w_lex: f64,
    pub quality: Option<QualityReport>,
    pub llm_calls: LedgerSnapshot,
    pub rejection_trace: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Scalar metric columns, used for side-by-side comparison.
pub const REPORT_METRICS: [&str; 5] = ["lexical", "cosine", "vendi", "quality", "llm_calls"];

impl DiversityReport {
    /// Value of a named metric column, with whether higher is better.
    pub fn metric(&self, name: &str) -> Option<(f64, bool)> {
        match name {
            "lexical" => Some((self.lexical.mean, true)),
            "cosine" => Some((self.cosine.mean, true)),
            "vendi" => Some((self.vendi, true)),
            "quality" => self.quality.as_ref().map(|q| (q.mean, true)),
            "llm_calls" => Some((self.llm_calls.generation_calls() as f64, false)),
            _ => None,
        }
    }
}

pub fn diversity_report(
    method: &str,
    items: &[DataInstance],
    kernel: &Kernel,
    vendi_kernel: VendiKernel,
    llm_calls: LedgerSnapshot,
) -> Result<DiversityReport, MetricsError> {
    if items.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: items.len() });
    }
    let metric_kernel = match vendi_kernel {
        VendiKernel::Combined => kernel.without_jitter(),
        VendiKernel::EmbeddingOnly => kernel.without_jitter().rbf_only(),
    };
    let k = build_kernel(items, &metric_kernel)?;
    let er = effective_rank_approx(&k)?;
    Ok(DiversityReport {
        method: method.to_string(),
        n: items.len(),
        lexical: mean_pairwise_jaccard_distance(items)?,
        cosine: mean_pairwise_cosine_distance(items)?,
        vendi: vendi_score(&k)?,
        effective_rank_approx: er.value,
        effective_rank_degenerate: er.degenerate,
        vendi_kernel,
        rbf_bandwidth: kernel.sigma,
        w_rbf: kernel.w_rbf,
        w_lex: kernel.w_lex,
        quality: None,
        llm_calls,
        rejection_trace: None,
        warnings: Vec::new(),
    })
}
