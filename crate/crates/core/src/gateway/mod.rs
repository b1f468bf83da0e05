//! Provider abstraction for chat generation, embeddings, textual-gradient
//! calls and judging.
//!
//! A [`Gateway`] wraps one chat provider and one embedding provider with a
//! retry policy, an admission limit on concurrent requests, and a
//! [`CallLedger`] that counts logical calls per category. Retries of a
//! logical call never add ledger entries.

mod http;
mod mock;
mod parse;
pub mod templates;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Embedding, KernelError};

pub use http::HttpProvider;
pub use mock::{MockChat, MockCluster, MockEmbedder, MockWorld, MockWorldConfig};
pub use parse::{parse_numbered, tagged_spans};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => matches!(status, 408 | 429 | 500..=599),
            ProviderError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider call failed after {attempts} attempt(s): {source}")]
    Provider {
        attempts: u32,
        #[source]
        source: ProviderError,
    },
    #[error("no parseable instances in response")]
    NoInstances { raw: String },
    #[error("{0} requires non-empty input")]
    EmptyInput(&'static str),
    #[error("embedding dimension changed from {expected} to {got}")]
    DimensionDrift { expected: usize, got: usize },
    #[error("provider returned {got} embeddings for {expected} texts")]
    EmbeddingCount { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid provider config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }

    pub fn system_content(&self) -> &str {
        self.messages
            .iter()
            .find(|m| m.role == "system")
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub total_tokens: Option<u64>,
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    /// Opaque replay position for deterministic providers (used by
    /// snapshots). Real providers have none.
    fn cursor(&self) -> Option<u64> {
        None
    }

    fn restore_cursor(&self, _cursor: u64) {}
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Base URL; `/chat/completions` and `/embeddings` are appended.
    pub endpoint: String,
    pub model: String,
    pub embedding_model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout_secs: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_concurrent: usize,
    pub embed_batch_size: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            embedding_model: "text-embedding-3-small".into(),
            temperature: 1.0,
            max_retries: 2,
            retry_backoff_ms: 500,
            timeout_secs: 60,
            api_key_env: "OPENAI_API_KEY".into(),
            max_concurrent: 4,
            embed_batch_size: 256,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config(format!("temperature must be in [0, 2], got {}", self.temperature)));
        }
        if self.max_concurrent == 0 {
            return Err(GatewayError::Config("max_concurrent must be positive".into()));
        }
        if self.embed_batch_size == 0 {
            return Err(GatewayError::Config("embed_batch_size must be positive".into()));
        }
        if self.max_retries > 10 {
            return Err(GatewayError::Config("max_retries must be at most 10".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallCategory {
    Generate,
    GradientGet,
    GradientApply,
    Judge,
    Embed,
    /// Generation calls made while initializing the threshold.
    Probe,
}

impl CallCategory {
    pub const ALL: [CallCategory; 6] = [
        CallCategory::Generate,
        CallCategory::GradientGet,
        CallCategory::GradientApply,
        CallCategory::Judge,
        CallCategory::Embed,
        CallCategory::Probe,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub generate: u64,
    pub gradient_get: u64,
    pub gradient_apply: u64,
    pub judge: u64,
    pub embed: u64,
    pub probe: u64,
    pub total: u64,
    pub total_tokens: u64,
}

impl LedgerSnapshot {
    /// Calls that produce or refine data: generate + gradient_get +
    /// gradient_apply.
    pub fn generation_calls(&self) -> u64 {
        self.generate + self.gradient_get + self.gradient_apply
    }

    pub fn get(&self, category: CallCategory) -> u64 {
        match category {
            CallCategory::Generate => self.generate,
            CallCategory::GradientGet => self.gradient_get,
            CallCategory::GradientApply => self.gradient_apply,
            CallCategory::Judge => self.judge,
            CallCategory::Embed => self.embed,
            CallCategory::Probe => self.probe,
        }
    }

    /// Counter-wise difference `self - earlier`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            generate: self.generate - earlier.generate,
            gradient_get: self.gradient_get - earlier.gradient_get,
            gradient_apply: self.gradient_apply - earlier.gradient_apply,
            judge: self.judge - earlier.judge,
            embed: self.embed - earlier.embed,
            probe: self.probe - earlier.probe,
            total: self.total - earlier.total,
            total_tokens: self.total_tokens - earlier.total_tokens,
        }
    }
}

/// Monotone per-category call counters.
#[derive(Debug, Default)]
pub struct CallLedger {
    counters: [AtomicU64; 6],
    tokens: AtomicU64,
}

impl CallLedger {
    pub fn record(&self, category: CallCategory, n: u64) {
        self.counters[category.slot()].fetch_add(n, Ordering::SeqCst);
    }

    fn add_tokens(&self, tokens: u64) {
        self.tokens.fetch_add(tokens, Ordering::SeqCst);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let c = |cat: CallCategory| self.counters[cat.slot()].load(Ordering::SeqCst);
        let mut s = LedgerSnapshot {
            generate: c(CallCategory::Generate),
            gradient_get: c(CallCategory::GradientGet),
            gradient_apply: c(CallCategory::GradientApply),
            judge: c(CallCategory::Judge),
            embed: c(CallCategory::Embed),
            probe: c(CallCategory::Probe),
            total: 0,
            total_tokens: self.tokens.load(Ordering::SeqCst),
        };
        s.total = CallCategory::ALL.iter().map(|&cat| s.get(cat)).sum();
        s
    }

    /// Sets every counter to at least the snapshot value (resume support).
    pub fn restore(&self, snapshot: &LedgerSnapshot) {
        for cat in CallCategory::ALL {
            self.counters[cat.slot()].fetch_max(snapshot.get(cat), Ordering::SeqCst);
        }
        self.tokens.fetch_max(snapshot.total_tokens, Ordering::SeqCst);
    }
}

/// Counting semaphore bounding in-flight provider requests.
#[derive(Debug)]
struct Admission {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Admission);

impl Admission {
    fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("admission lock poisoned");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("admission lock poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("admission lock poisoned");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Items parsed from a list-style response.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationBatch {
    pub instances: Vec<String>,
    pub raw: String,
    pub warnings: Vec<String>,
}

/// `<START>…<END>` spans parsed from a gradient call.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedOutput {
    pub items: Vec<String>,
    pub warnings: Vec<String>,
}

pub struct Gateway {
    config: ProviderConfig,
    chat: Arc<dyn ChatProvider>,
    embedder: Arc<dyn EmbeddingProvider>,
    ledger: CallLedger,
    admission: Admission,
    embedding_dim: Mutex<Option<usize>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(
        config: ProviderConfig,
        chat: Arc<dyn ChatProvider>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Self {
            admission: Admission::new(config.max_concurrent),
            config,
            chat,
            embedder,
            ledger: CallLedger::default(),
            embedding_dim: Mutex::new(None),
        })
    }

    /// Gateway over the offline mock world.
    pub fn mock(world: MockWorldConfig) -> Self {
        Self::mock_with(ProviderConfig::default(), world)
    }

    pub fn mock_with(config: ProviderConfig, world: MockWorldConfig) -> Self {
        let world = Arc::new(MockWorld::new(world));
        Self::new(
            ProviderConfig { kind: ProviderKind::Mock, ..config },
            Arc::new(MockChat::new(world.clone())),
            Arc::new(MockEmbedder::new(world)),
        )
        .expect("default provider config is valid")
    }

    /// HTTP provider for chat and embeddings, reading the key from the
    /// configured environment variable.
    pub fn http(config: ProviderConfig) -> Result<Self, GatewayError> {
        let provider = Arc::new(HttpProvider::from_config(&config)?);
        Self::new(ProviderConfig { kind: ProviderKind::Http, ..config }, provider.clone(), provider)
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    pub fn chat_provider(&self) -> &dyn ChatProvider {
        self.chat.as_ref()
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, ProviderError>) -> Result<T, GatewayError> {
        let attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.admission.acquire();
                call()
            };
            match result {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < attempts => {
                    let delay = self.config.retry_backoff_ms.saturating_mul(1 << (attempt - 1));
                    log::warn!("provider call failed ({e}); retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                }
                Err(source) => return Err(GatewayError::Provider { attempts: attempt, source }),
            }
        }
    }

    /// One logical chat call, counted once under `category`.
    pub fn chat(
        &self,
        category: CallCategory,
        system: Option<&str>,
        user: &str,
        temperature: Option<f64>,
        model: Option<&str>,
    ) -> Result<String, GatewayError> {
        let mut messages = Vec::with_capacity(2);
        if let Some(s) = system {
            messages.push(ChatMessage::system(s));
        }
        messages.push(ChatMessage::user(user));
        let request = ChatRequest {
            model: model.unwrap_or(&self.config.model).to_string(),
            messages,
            temperature: temperature.unwrap_or(self.config.temperature),
        };
        self.ledger.record(category, 1);
        let response = self.with_retries(|| self.chat.complete(&request))?;
        if let Some(t) = response.total_tokens {
            self.ledger.add_tokens(t);
        }
        Ok(response.content)
    }

    pub fn generate_batch(&self, prompt: &str, batch_size: usize) -> Result<GenerationBatch, GatewayError> {
        self.generate_batch_with(prompt, batch_size, CallCategory::Generate, None)
    }

    /// One generation call asking for `batch_size` numbered items.
    pub fn generate_batch_with(
        &self,
        prompt: &str,
        batch_size: usize,
        category: CallCategory,
        temperature: Option<f64>,
    ) -> Result<GenerationBatch, GatewayError> {
        if batch_size == 0 {
            return Err(GatewayError::EmptyInput("generate_batch"));
        }
        let system = templates::generation_system(batch_size);
        let raw = self.chat(category, Some(&system), prompt, temperature, None)?;
        let mut instances = parse_numbered(&raw);
        let mut warnings = Vec::new();
        if instances.is_empty() {
            return Err(GatewayError::NoInstances { raw });
        }
        if instances.len() < batch_size {
            warnings.push(format!("parsed {} of {} requested instances", instances.len(), batch_size));
        } else if instances.len() > batch_size {
            warnings.push(format!("truncated {} instances to {}", instances.len(), batch_size));
            instances.truncate(batch_size);
        }
        Ok(GenerationBatch { instances, raw, warnings })
    }

    /// Unit-norm embeddings, one per text. The first call fixes the
    /// dimension for the lifetime of the gateway.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyInput("embed"));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.embed_batch_size) {
            self.ledger.record(CallCategory::Embed, 1);
            let vectors = self.with_retries(|| self.embedder.embed(chunk))?;
            if vectors.len() != chunk.len() {
                return Err(GatewayError::EmbeddingCount { expected: chunk.len(), got: vectors.len() });
            }
            for v in vectors {
                self.check_dim(v.len())?;
                out.push(Embedding::new(v)?);
            }
        }
        Ok(out)
    }

    fn check_dim(&self, dim: usize) -> Result<(), GatewayError> {
        let mut fixed = self.embedding_dim.lock().expect("dimension lock poisoned");
        match *fixed {
            None => {
                *fixed = Some(dim);
                Ok(())
            }
            Some(expected) if expected == dim => Ok(()),
            Some(expected) => Err(GatewayError::DimensionDrift { expected, got: dim }),
        }
    }

    /// Critique call: why did `rejected` fail the diversity test against
    /// `existing`? Returns up to `m` feedback strings.
    pub fn get_gradients(
        &self,
        system_prompt: &str,
        user_prompt: &str,
        rejected: &[&str],
        existing: &[&str],
        m: usize,
    ) -> Result<TaggedOutput, GatewayError> {
        if rejected.is_empty() {
            return Err(GatewayError::EmptyInput("get_gradients"));
        }
        let prompt = templates::render_gradient_get(system_prompt, user_prompt, rejected, existing, m);
        let raw = self.chat(CallCategory::GradientGet, None, &prompt, None, None)?;
        let mut items = tagged_spans(&raw);
        let mut warnings = Vec::new();
        if items.len() < m {
            warnings.push(format!("parsed {} of {} requested gradients", items.len(), m));
        }
        items.truncate(m);
        Ok(TaggedOutput { items, warnings })
    }

    /// Edit call: apply `gradients` to the prompt, returning successor
    /// prompts.
    pub fn apply_gradients(
        &self,
        system_prompt: &str,
        user_prompt: &str,
        gradients: &[String],
    ) -> Result<TaggedOutput, GatewayError> {
        if gradients.is_empty() {
            return Err(GatewayError::EmptyInput("apply_gradients"));
        }
        let prompt = templates::render_gradient_apply(system_prompt, user_prompt, gradients);
        let raw = self.chat(CallCategory::GradientApply, None, &prompt, None, None)?;
        let items = tagged_spans(&raw);
        let mut warnings = Vec::new();
        if items.is_empty() {
            warnings.push("no successor prompts parsed".to_string());
        }
        Ok(TaggedOutput { items, warnings })
    }

    /// One judge call with the given model id.
    pub fn judge(&self, model: &str, prompt: &str) -> Result<String, GatewayError> {
        self.chat(CallCategory::Judge, None, prompt, Some(0.0), Some(model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Scripted {
        replies: Mutex<Vec<Result<String, ProviderError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<String, ProviderError>>) -> Arc<Self> {
            replies.reverse();
            Arc::new(Self { replies: Mutex::new(replies), calls: AtomicUsize::new(0) })
        }
    }

    impl ChatProvider for Scripted {
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let r = self.replies.lock().unwrap().pop().expect("script exhausted");
            r.map(|content| ChatResponse { content, total_tokens: Some(7) })
        }
    }

    struct FixedEmbed(Vec<Vec<f64>>);

    impl EmbeddingProvider for FixedEmbed {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
            Ok(texts.iter().enumerate().map(|(i, _)| self.0[i % self.0.len()].clone()).collect())
        }
    }

    fn gateway(chat: Arc<Scripted>) -> Gateway {
        let cfg = ProviderConfig { retry_backoff_ms: 1, ..Default::default() };
        Gateway::new(cfg, chat, Arc::new(FixedEmbed(vec![vec![1.0, 0.0]]))).unwrap()
    }

    #[test]
    fn numbered_batch_and_underdelivery() {
        let chat = Scripted::new(vec![
            Ok("1. A\n2. B".into()),
            Ok((1..=8).map(|i| format!("{i}. item {i}")).collect::<Vec<_>>().join("\n")),
            Ok("".into()),
        ]);
        let gw = gateway(chat);
        let b = gw.generate_batch("p", 2).unwrap();
        assert_eq!(b.instances, vec!["A", "B"]);
        assert!(b.warnings.is_empty());
        let b = gw.generate_batch("p", 10).unwrap();
        assert_eq!(b.instances.len(), 8);
        assert_eq!(b.warnings.len(), 1);
        assert!(matches!(gw.generate_batch("p", 3), Err(GatewayError::NoInstances { .. })));
        let s = gw.ledger().snapshot();
        assert_eq!(s.generate, 3);
        assert_eq!(s.total, 3);
        assert_eq!(s.total_tokens, 21);
    }

    #[test]
    fn retries_do_not_double_count() {
        let chat = Scripted::new(vec![
            Err(ProviderError::Transport("reset".into())),
            Err(ProviderError::Status { status: 503, body: String::new() }),
            Ok("1. ok".into()),
        ]);
        let gw = gateway(chat.clone());
        assert_eq!(gw.generate_batch("p", 1).unwrap().instances, vec!["ok"]);
        assert_eq!(chat.calls.load(Ordering::SeqCst), 3);
        assert_eq!(gw.ledger().snapshot().generate, 1);
    }

    #[test]
    fn non_retryable_and_exhausted() {
        let chat = Scripted::new(vec![Err(ProviderError::Status { status: 401, body: "no".into() })]);
        let gw = gateway(chat.clone());
        assert!(matches!(gw.generate_batch("p", 1), Err(GatewayError::Provider { attempts: 1, .. })));
        let chat = Scripted::new(vec![Err(ProviderError::Transport("x".into())); 3]);
        let gw = gateway(chat.clone());
        assert!(matches!(gw.generate_batch("p", 1), Err(GatewayError::Provider { attempts: 3, .. })));
        assert_eq!(chat.calls.load(Ordering::SeqCst), 3);
        assert_eq!(gw.ledger().snapshot().generate, 1);
    }

    #[test]
    fn gradient_parsing() {
        let chat = Scripted::new(vec![
            Ok("<START>g1<END> noise <START>g2<END>".into()),
            Ok("<START>p1 <START>inner<END><END><START>p2<END>".into()),
        ]);
        let gw = gateway(chat);
        let g = gw.get_gradients("s", "u", &["r"], &[], 3).unwrap();
        assert_eq!(g.items, vec!["g1", "g2"]);
        assert_eq!(g.warnings.len(), 1);
        let a = gw.apply_gradients("s", "u", &g.items).unwrap();
        assert_eq!(a.items, vec!["p1 <START>inner<END>", "p2"]);
        assert!(matches!(gw.get_gradients("s", "u", &[], &[], 3), Err(GatewayError::EmptyInput(_))));
        assert!(matches!(gw.apply_gradients("s", "u", &[]), Err(GatewayError::EmptyInput(_))));
        let s = gw.ledger().snapshot();
        assert_eq!((s.gradient_get, s.gradient_apply, s.generation_calls()), (1, 1, 2));
    }

    #[test]
    fn embed_checks_dimension() {
        struct Drift(AtomicUsize);
        impl EmbeddingProvider for Drift {
            fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
                let d = 2 + self.0.fetch_add(1, Ordering::SeqCst);
                Ok(texts.iter().map(|_| vec![1.0; d]).collect())
            }
        }
        let gw = Gateway::new(ProviderConfig::default(), Scripted::new(vec![]), Arc::new(Drift(AtomicUsize::new(0))))
            .unwrap();
        assert!(matches!(gw.embed(&[]), Err(GatewayError::EmptyInput(_))));
        assert_eq!(gw.embed(&["a".into()]).unwrap()[0].dim(), 2);
        assert!(matches!(
            gw.embed(&["a".into()]),
            Err(GatewayError::DimensionDrift { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn embed_batches_requests() {
        let cfg = ProviderConfig { embed_batch_size: 4, ..Default::default() };
        let gw = Gateway::new(cfg, Scripted::new(vec![]), Arc::new(FixedEmbed(vec![vec![0.0, 2.0]]))).unwrap();
        let texts: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let e = gw.embed(&texts).unwrap();
        assert_eq!(e.len(), 10);
        assert_eq!(e[0].as_slice(), &[0.0, 1.0]);
        assert_eq!(gw.ledger().snapshot().embed, 3);
    }

    #[test]
    fn config_validation() {
        assert!(ProviderConfig { temperature: 3.0, ..Default::default() }.validate().is_err());
        assert!(ProviderConfig { max_concurrent: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn admission_bounds_concurrency() {
        struct Slow {
            live: AtomicUsize,
            peak: AtomicUsize,
        }
        impl ChatProvider for Slow {
            fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, ProviderError> {
                let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.live.fetch_sub(1, Ordering::SeqCst);
                Ok(ChatResponse { content: "1. x".into(), total_tokens: None })
            }
        }
        let slow = Arc::new(Slow { live: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let cfg = ProviderConfig { max_concurrent: 2, ..Default::default() };
        let gw = Gateway::new(cfg, slow.clone(), Arc::new(FixedEmbed(vec![vec![1.0]]))).unwrap();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| gw.generate_batch("p", 1).unwrap());
            }
        });
        assert!(slow.peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(gw.ledger().snapshot().generate, 8);
    }
}
