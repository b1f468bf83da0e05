//! Similarity kernels over data instances and explorer prompts.
//!
//! The data kernel is a convex combination of an RBF kernel on unit-norm
//! embeddings and a Jaccard kernel on stop-word-filtered token sets:
//!
//! ```text
//! k(a, b) = w_rbf * exp(-|ea - eb|^2 / (2 sigma^2)) + w_lex * J(ta, tb)
//! ```
//!
//! Both terms are positive semi-definite, so the combination is too. A small
//! jitter is added to the diagonal so Cholesky factorizations of kernels with
//! exact duplicates still succeed.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("embedding has non-finite entries")]
    NonFinite,
    #[error("embedding is the zero vector")]
    ZeroVector,
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("invalid kernel config: {0}")]
    InvalidConfig(String),
    #[error("cannot build a kernel over zero items")]
    Empty,
    #[error("kernel is not positive semi-definite: smallest eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
}

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// L2-normalizes `values`. Zero and non-finite vectors are rejected.
    pub fn new(mut values: Vec<f64>) -> Result<Self, KernelError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(KernelError::ZeroVector);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64, KernelError> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn squared_distance(&self, other: &Embedding) -> Result<f64, KernelError> {
        self.check_dim(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    fn check_dim(&self, other: &Embedding) -> Result<(), KernelError> {
        if self.dim() != other.dim() {
            return Err(KernelError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }
}

impl Serialize for Embedding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        // Already-normalized input is kept bit-exact so records round-trip.
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.iter().all(|v| v.is_finite()) && (norm - 1.0).abs() <= 1e-9 {
            return Ok(Self(values));
        }
        Embedding::new(values).map_err(serde::de::Error::custom)
    }
}

/// Lowercased word tokens with stop words removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet(BTreeSet<String>);

impl TokenSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// The bundled English list (`data/stopwords.txt`).
    pub fn english() -> Self {
        Self::from_text(BUNDLED_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One token per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

pub fn tokenize(text: &str, stopwords: &StopWords) -> TokenSet {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .collect()
}

pub fn rbf_similarity(a: &Embedding, b: &Embedding, bandwidth: f64) -> Result<f64, KernelError> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(KernelError::InvalidBandwidth(bandwidth));
    }
    let d2 = a.squared_distance(b)?;
    Ok((-d2 / (2.0 * bandwidth * bandwidth)).exp())
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counted as identical.
pub fn jaccard_similarity(a: &TokenSet, b: &TokenSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.0.intersection(&b.0).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Anything that can be placed in a similarity kernel.
pub trait KernelItem {
    fn embedding(&self) -> &Embedding;
    fn tokens(&self) -> &TokenSet;
}

/// One generated text item.
#[derive(Debug, Clone, PartialEq)]
pub struct DataInstance {
    pub id: String,
    pub text: String,
    pub embedding: Embedding,
    pub token_set: TokenSet,
    pub explorer_id: String,
    pub iteration: u32,
    pub marginal_gain: f64,
}

impl DataInstance {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        embedding: Embedding,
        stopwords: &StopWords,
    ) -> Self {
        let text = text.into();
        let token_set = tokenize(&text, stopwords);
        Self {
            id: id.into(),
            text,
            embedding,
            token_set,
            explorer_id: String::new(),
            iteration: 0,
            marginal_gain: 0.0,
        }
    }
}

impl KernelItem for DataInstance {
    fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    fn tokens(&self) -> &TokenSet {
        &self.token_set
    }
}

/// RBF bandwidth choice: a fixed sigma or the median pairwise distance of a
/// reference set, resolved once per run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    #[default]
    Median,
    Fixed(f64),
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Median => serializer.serialize_str("median"),
            Bandwidth::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Bandwidth::Fixed(v)),
            Raw::Str(s) if s == "median" => Ok(Bandwidth::Median),
            Raw::Str(s) => s
                .parse::<f64>()
                .map(Bandwidth::Fixed)
                .map_err(|_| serde::de::Error::custom(format!("bandwidth must be a number or \"median\", got {s:?}"))),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Median => f.write_str("median"),
            Bandwidth::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// User-facing kernel settings. Resolve to a [`Kernel`] before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub w_rbf: f64,
    pub w_lex: f64,
    pub bandwidth: Bandwidth,
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            w_rbf: 0.7,
            w_lex: 0.3,
            bandwidth: Bandwidth::Median,
            jitter: 1e-8,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.w_rbf >= 0.0 && self.w_lex >= 0.0) {
            return Err(KernelError::InvalidConfig("kernel weights must be non-negative".into()));
        }
        if (self.w_rbf + self.w_lex - 1.0).abs() > 1e-12 {
            return Err(KernelError::InvalidConfig(format!(
                "kernel weights must sum to 1, got {} + {}",
                self.w_rbf, self.w_lex
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(KernelError::InvalidConfig(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(KernelError::InvalidBandwidth(s));
            }
        }
        Ok(())
    }

    /// Fixes the bandwidth, using `reference` for the median heuristic.
    pub fn resolve(&self, reference: &[&Embedding]) -> Result<Kernel, KernelError> {
        self.validate()?;
        let sigma = match self.bandwidth {
            Bandwidth::Fixed(s) => s,
            Bandwidth::Median => median_bandwidth(reference)?,
        };
        Ok(Kernel {
            w_rbf: self.w_rbf,
            w_lex: self.w_lex,
            sigma,
            jitter: self.jitter,
        })
    }
}

/// Median pairwise Euclidean distance. Zero distances (duplicates) are
/// skipped; falls back to 1.0 when every pair coincides or fewer than two
/// embeddings are given.
pub fn median_bandwidth(embeddings: &[&Embedding]) -> Result<f64, KernelError> {
    let mut dists = Vec::new();
    for (i, a) in embeddings.iter().enumerate() {
        for b in &embeddings[i + 1..] {
            let d = a.squared_distance(b)?.sqrt();
            if d > 1e-12 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Ok(1.0);
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    Ok(if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    })
}

/// A kernel with its bandwidth fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub w_rbf: f64,
    pub w_lex: f64,
    pub sigma: f64,
    pub jitter: f64,
}

impl Kernel {
    pub fn new(config: &KernelConfig, sigma: f64) -> Result<Self, KernelError> {
        KernelConfig {
            bandwidth: Bandwidth::Fixed(sigma),
            ..*config
        }
        .resolve(&[])
    }

    /// Embedding-only variant (used for the explorer kernel).
    pub fn rbf_only(&self) -> Self {
        Self {
            w_rbf: 1.0,
            w_lex: 0.0,
            ..*self
        }
    }

    /// Same weights and bandwidth without diagonal jitter (for metrics).
    pub fn without_jitter(&self) -> Self {
        Self { jitter: 0.0, ..*self }
    }

    /// Pairwise similarity, ignoring jitter. Identical items give exactly 1.
    pub fn similarity<T: KernelItem + ?Sized>(&self, a: &T, b: &T) -> Result<f64, KernelError> {
        let r = rbf_similarity(a.embedding(), b.embedding(), self.sigma)?;
        if self.w_lex == 0.0 {
            return Ok(r);
        }
        let j = jaccard_similarity(a.tokens(), b.tokens());
        // r + w_lex (j - r) equals w_rbf r + w_lex j when the weights sum to
        // one, and is exactly 1 when r = j = 1.
        Ok(r + self.w_lex * (j - r))
    }

    /// Diagonal entry `k(w, w)`.
    pub fn self_similarity(&self) -> f64 {
        1.0 + self.jitter
    }

    /// Similarities between `item` and each of `others`.
    pub fn similarities<T: KernelItem>(&self, item: &T, others: &[T]) -> Result<Vec<f64>, KernelError> {
        others.iter().map(|o| self.similarity(item, o)).collect()
    }
}

/// Symmetric PSD kernel matrix. Matrices from [`build_kernel`] have unit
/// diagonal plus jitter and off-diagonal entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: DMatrix<f64>,
    jitter: f64,
}

impl SimilarityMatrix {
    /// Wraps an arbitrary symmetric matrix (symmetry checked to 1e-12).
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self, KernelError> {
        if entries.nrows() != entries.ncols() {
            return Err(KernelError::DimensionMismatch(entries.nrows(), entries.ncols()));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(KernelError::NonFinite);
                }
                if j > i && (v - entries[(j, i)]).abs() > 1e-12 {
                    return Err(KernelError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { entries, jitter: 0.0 })
    }

    pub fn from_rows(n: usize, rows: &[f64]) -> Result<Self, KernelError> {
        Self::from_matrix(DMatrix::from_row_slice(n, n, rows))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            jitter: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn principal(&self, indices: &[usize]) -> SimilarityMatrix {
        let m = indices.len();
        let entries = DMatrix::from_fn(m, m, |r, c| self.entries[(indices[r], indices[c])]);
        Self {
            entries,
            jitter: self.jitter,
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }
}

pub fn build_kernel<T: KernelItem>(items: &[T], kernel: &Kernel) -> Result<SimilarityMatrix, KernelError> {
    if items.is_empty() {
        return Err(KernelError::Empty);
    }
    let n = items.len();
    let dim = items[0].embedding().dim();
    if let Some(bad) = items.iter().find(|it| it.embedding().dim() != dim) {
        return Err(KernelError::DimensionMismatch(dim, bad.embedding().dim()));
    }
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        entries[(i, i)] = kernel.self_similarity();
        for j in i + 1..n {
            let v = kernel.similarity(&items[i], &items[j])?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    if entries.clone().cholesky().is_none() {
        let min_eig = entries.clone().symmetric_eigen().eigenvalues.min();
        // Without jitter an exactly singular PSD kernel is still valid.
        if min_eig < -1e-9 || kernel.jitter > 0.0 {
            return Err(KernelError::NotPsd(min_eig));
        }
    }
    Ok(SimilarityMatrix {
        entries,
        jitter: kernel.jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn inst(id: &str, text: &str, e: &[f64]) -> DataInstance {
        DataInstance::new(id, text, emb(e), &StopWords::empty())
    }

    fn kernel() -> Kernel {
        Kernel::new(&KernelConfig::default(), 1.0).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        let sw: StopWords = ["the"].into_iter().collect();
        let t = tokenize("The cat sat.", &sw);
        assert_eq!(t, ["cat", "sat"].into_iter().collect());
        assert!(tokenize("", &sw).is_empty());
        let t = tokenize("Red ball game", &StopWords::empty());
        assert_eq!(t, ["red", "ball", "game"].into_iter().collect());
    }

    #[test]
    fn tokenize_unicode_and_contractions() {
        let t = tokenize("Ÿes, CAFÉ don't", &StopWords::english());
        assert!(t.contains("ÿes"));
        assert!(t.contains("café"));
        assert!(!t.contains("don"));
        assert!(!t.contains("t"));
    }

    #[test]
    fn bundled_stopwords_size() {
        let sw = StopWords::english();
        assert!(sw.len() > 120, "{}", sw.len());
        assert!(sw.contains("the") && sw.contains("and"));
        assert!(!sw.contains(""));
    }

    #[test]
    fn embedding_normalizes_and_rejects_degenerate() {
        let e = emb(&[3.0, 4.0]);
        assert!((e.as_slice()[0] - 0.6).abs() < 1e-15);
        let norm: f64 = e.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(Embedding::new(vec![0.0, 0.0]), Err(KernelError::ZeroVector));
        assert_eq!(Embedding::new(vec![f64::NAN, 1.0]), Err(KernelError::NonFinite));
    }

    #[test]
    fn rbf_examples() {
        let x = emb(&[1.0, 0.0]);
        let y = emb(&[0.0, 1.0]);
        let z = emb(&[-1.0, 0.0]);
        assert_eq!(rbf_similarity(&x, &x, 0.3).unwrap(), 1.0);
        assert!((rbf_similarity(&x, &y, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((rbf_similarity(&x, &y, 1.0).unwrap() - 0.367879).abs() < 1e-6);
        assert!((rbf_similarity(&x, &z, 1.0).unwrap() - 0.135335).abs() < 1e-6);
        assert!(matches!(
            rbf_similarity(&x, &emb(&[1.0, 0.0, 0.0]), 1.0),
            Err(KernelError::DimensionMismatch(2, 3))
        ));
        assert!(rbf_similarity(&x, &y, 0.0).is_err());
    }

    #[test]
    fn jaccard_examples() {
        let a: TokenSet = ["red", "ball", "game"].into_iter().collect();
        let b: TokenSet = ["blue", "ball", "game"].into_iter().collect();
        let c: TokenSet = ["sky"].into_iter().collect();
        assert_eq!(jaccard_similarity(&a, &a), 1.0);
        assert_eq!(jaccard_similarity(&a, &c), 0.0);
        assert_eq!(jaccard_similarity(&a, &b), 0.5);
        assert_eq!(jaccard_similarity(&TokenSet::default(), &TokenSet::default()), 1.0);
    }

    #[test]
    fn build_kernel_examples() {
        let k = kernel();
        let single = build_kernel(&[inst("a", "x", &[1.0, 0.0])], &k).unwrap();
        assert_eq!(single.n(), 1);
        assert_eq!(single.get(0, 0), 1.0 + 1e-8);

        let dup = build_kernel(&[inst("a", "red ball", &[1.0, 0.0]), inst("b", "red ball", &[1.0, 0.0])], &k).unwrap();
        assert_eq!(dup.get(0, 1), 1.0);

        let pair = build_kernel(
            &[inst("a", "red ball game", &[1.0, 0.0]), inst("b", "blue ball game", &[0.0, 1.0])],
            &k,
        )
        .unwrap();
        let expected = 0.7 * (-1.0f64).exp() + 0.3 * 0.5;
        assert!((pair.get(0, 1) - expected).abs() < 1e-12);
        assert!((pair.get(0, 1) - 0.407516).abs() < 1e-6);
    }

    #[test]
    fn build_kernel_rejects_bad_input() {
        let k = kernel();
        assert_eq!(build_kernel::<DataInstance>(&[], &k), Err(KernelError::Empty));
        let mixed = [inst("a", "x", &[1.0, 0.0]), inst("b", "y", &[1.0, 0.0, 0.0])];
        assert!(matches!(build_kernel(&mixed, &k), Err(KernelError::DimensionMismatch(..))));
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::default().validate().is_ok());
        let bad = KernelConfig { w_rbf: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = KernelConfig { bandwidth: Bandwidth::Fixed(-1.0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn median_bandwidth_skips_duplicates() {
        let a = emb(&[1.0, 0.0]);
        let b = emb(&[0.0, 1.0]);
        let c = emb(&[-1.0, 0.0]);
        // pairs: ab = sqrt2, ac = 2, bc = sqrt2, aa' = 0 (skipped)
        let a2 = a.clone();
        let m = median_bandwidth(&[&a, &b, &c, &a2]).unwrap();
        assert!((m - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(median_bandwidth(&[&a, &a2]).unwrap(), 1.0);
    }

    #[test]
    fn bandwidth_serde() {
        #[derive(Deserialize, Serialize)]
        struct W {
            b: Bandwidth,
        }
        let w: W = serde_json::from_str(r#"{"b":"median"}"#).unwrap();
        assert_eq!(w.b, Bandwidth::Median);
        let w: W = serde_json::from_str(r#"{"b":0.5}"#).unwrap();
        assert_eq!(w.b, Bandwidth::Fixed(0.5));
        assert!(serde_json::from_str::<W>(r#"{"b":"wide"}"#).is_err());
        assert_eq!(serde_json::to_string(&W { b: Bandwidth::Median }).unwrap(), r#"{"b":"median"}"#);
    }

    fn arb_items(max: usize) -> impl Strategy<Value = Vec<DataInstance>> {
        let words = ["red", "blue", "ball", "game", "sky", "sea", "goal", "team", "run", "jump"];
        prop::collection::vec(
            (prop::collection::vec(-1.0f64..1.0, 6), prop::collection::vec(0usize..10, 0..5)),
            1..max,
        )
        .prop_filter_map("zero embedding", move |raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, (v, w))| {
                    let text = w.iter().map(|&ix| words[ix]).collect::<Vec<_>>().join(" ");
                    Embedding::new(v)
                        .ok()
                        .map(|e| DataInstance::new(format!("i{i}"), text, e, &StopWords::empty()))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn kernel_invariants_hold(items in arb_items(50), sigma in 0.2f64..2.0) {
            let k = Kernel::new(&KernelConfig::default(), sigma).unwrap();
            let m = build_kernel(&items, &k).unwrap();
            let n = m.n();
            for (i, item) in items.iter().enumerate() {
                prop_assert!((m.get(i, i) - (1.0 + k.jitter)).abs() <= 1e-12);
                prop_assert_eq!(k.similarity(item, item).unwrap(), 1.0);
                for j in 0..n {
                    prop_assert!((m.get(i, j) - m.get(j, i)).abs() <= 1e-12);
                    if i != j {
                        prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
                    }
                }
            }
            prop_assert!(m.matrix().clone().cholesky().is_some());
        }

        #[test]
        fn kernel_permutation_equivariant(items in arb_items(12), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let k = kernel();
            let mut perm: Vec<usize> = (0..items.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<DataInstance> = perm.iter().map(|&p| items[p].clone()).collect();
            let a = build_kernel(&items, &k).unwrap();
            let b = build_kernel(&permuted, &k).unwrap();
            for i in 0..perm.len() {
                for j in 0..perm.len() {
                    prop_assert_eq!(b.get(i, j), a.get(perm[i], perm[j]));
                }
            }
        }

        #[test]
        fn pairwise_similarities_symmetric(items in arb_items(6)) {
            let k = kernel();
            for a in &items {
                for b in &items {
                    prop_assert_eq!(
                        rbf_similarity(&a.embedding, &b.embedding, 0.7).unwrap(),
                        rbf_similarity(&b.embedding, &a.embedding, 0.7).unwrap()
                    );
                    prop_assert_eq!(
                        jaccard_similarity(&a.token_set, &b.token_set),
                        jaccard_similarity(&b.token_set, &a.token_set)
                    );
                    prop_assert_eq!(k.similarity(a, b).unwrap(), k.similarity(b, a).unwrap());
                }
            }
        }
    }
}
