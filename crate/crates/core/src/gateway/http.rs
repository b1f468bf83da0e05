//! Chat-completions and embeddings over HTTP, in the common OpenAI-style
//! wire format.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::json;

use super::{ChatProvider, ChatRequest, ChatResponse, EmbeddingProvider, GatewayError, ProviderConfig, ProviderError};

#[derive(Debug)]
pub struct HttpProvider {
    client: Client,
    endpoint: String,
    embedding_model: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatBody {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    total_tokens: Option<u64>,
}

#[derive(Deserialize)]
struct EmbeddingBody {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl HttpProvider {
    /// The API key is read from `config.api_key_env`; a missing variable is
    /// allowed (local servers often need none).
    pub fn from_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::new(config, api_key)
    }

    pub fn new(config: &ProviderConfig, api_key: Option<String>) -> Result<Self, GatewayError> {
        if !(config.endpoint.starts_with("http://") || config.endpoint.starts_with("https://")) {
            return Err(GatewayError::Config(format!("endpoint must be an http(s) URL: {}", config.endpoint)));
        }
        let client = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
            embedding_model: config.embedding_model.clone(),
            api_key,
        })
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<String, ProviderError> {
        let mut req = self.client.post(format!("{}/{path}", self.endpoint)).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status { status: status.as_u16(), body: truncate(&text, 500) });
        }
        Ok(text)
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let text = self.post("chat/completions", body)?;
        let parsed: ChatBody = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("response has no message content".into()))?;
        Ok(ChatResponse { content, total_tokens: parsed.usage.and_then(|u| u.total_tokens) })
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({ "model": self.embedding_model, "input": texts });
        let text = self.post("embeddings", body)?;
        let mut parsed: EmbeddingBody =
            serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}
