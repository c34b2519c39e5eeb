//! Client for OpenAI-compatible `/embeddings` endpoints.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{Embedder, EmbeddingError, EmbeddingVector, EMBEDDING_DIM, MAX_BATCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenAiEmbedderConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for OpenAiEmbedderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "text-embedding-3-small".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 10_000,
            max_attempts: 3,
            backoff_ms: 250,
        }
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
    encoding_format: &'static str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

enum Failure {
    Transport { message: String, retryable: bool },
    Integrity(String),
}

fn transport(message: impl Into<String>, retryable: bool) -> Failure {
    Failure::Transport {
        message: message.into(),
        retryable,
    }
}

pub struct OpenAiEmbedder {
    config: OpenAiEmbedderConfig,
    api_key: Option<String>,
    tag: String,
    http: reqwest::Client,
}

impl OpenAiEmbedder {
    /// Builds a client, reading the API key from the configured environment variable.
    pub fn new(config: OpenAiEmbedderConfig) -> Result<Self, EmbeddingError> {
        let api_key = std::env::var(&config.api_key_env).ok();
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(
        config: OpenAiEmbedderConfig,
        api_key: Option<String>,
    ) -> Result<Self, EmbeddingError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| EmbeddingError::Transport {
                message: e.to_string(),
                retryable: false,
                attempts: 0,
            })?;
        Ok(Self {
            tag: format!("openai:{}", config.model),
            config,
            api_key,
            http,
        })
    }

    async fn post_once(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, Failure> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut req = self.http.post(url).json(&EmbeddingRequest {
            model: &self.config.model,
            input: texts,
            encoding_format: "float",
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| transport(e.to_string(), true))?;
        let status = resp.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let body = resp.text().await.unwrap_or_default();
            return Err(transport(format!("HTTP {status}: {body}"), retryable));
        }
        let parsed: EmbeddingResponse = resp
            .json()
            .await
            .map_err(|e| Failure::Integrity(format!("malformed response: {e}")))?;
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        if data.len() != texts.len() || data.iter().enumerate().any(|(i, d)| d.index != i) {
            return Err(Failure::Integrity(format!(
                "response covers {} of {} inputs",
                data.len(),
                texts.len()
            )));
        }
        data.into_iter()
            .map(|d| {
                if d.embedding.len() != EMBEDDING_DIM {
                    return Err(Failure::Integrity(format!(
                        "dimension {} from backend, expected {EMBEDDING_DIM}",
                        d.embedding.len()
                    )));
                }
                EmbeddingVector::new(d.embedding, self.tag.clone())
                    .map_err(|e| Failure::Integrity(e.to_string()))
            })
            .collect()
    }
}

#[async_trait]
impl Embedder for OpenAiEmbedder {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(MAX_BATCH) {
            let mut attempts = 0;
            loop {
                attempts += 1;
                match self.post_once(chunk).await {
                    Ok(v) => {
                        out.extend(v);
                        break;
                    }
                    Err(Failure::Integrity(message)) => {
                        return Err(EmbeddingError::Integrity(message))
                    }
                    Err(Failure::Transport { message, retryable }) => {
                        if !retryable || attempts >= self.config.max_attempts {
                            return Err(EmbeddingError::Transport {
                                message,
                                retryable,
                                attempts,
                            });
                        }
                        let delay = self.config.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                        tokio::time::sleep(Duration::from_millis(delay)).await;
                    }
                }
            }
        }
        Ok(out)
    }
}
