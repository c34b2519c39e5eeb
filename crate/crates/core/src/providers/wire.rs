//! HTTPS+JSON backends for OpenAI chat completions, Gemini `generateContent`
//! and Anthropic messages.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatBackend, CompletionRequest, ProviderError, RawCompletion, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireFormat {
    OpenAi,
    Gemini,
    Anthropic,
}

impl WireFormat {
    pub fn default_base_url(self) -> &'static str {
        match self {
            Self::OpenAi => "https://api.openai.com/v1",
            Self::Gemini => "https://generativelanguage.googleapis.com/v1beta",
            Self::Anthropic => "https://api.anthropic.com/v1",
        }
    }

    pub fn default_key_env(self) -> &'static str {
        match self {
            Self::OpenAi => "OPENAI_API_KEY",
            Self::Gemini => "GEMINI_API_KEY",
            Self::Anthropic => "ANTHROPIC_API_KEY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Name used in reports and routing (e.g. "openai").
    pub name: String,
    pub format: WireFormat,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
}

impl HttpBackendConfig {
    pub fn new(name: impl Into<String>, format: WireFormat) -> Self {
        Self {
            name: name.into(),
            format,
            base_url: None,
            api_key_env: None,
        }
    }

    pub fn base_url(&self) -> &str {
        self.base_url
            .as_deref()
            .unwrap_or(self.format.default_base_url())
            .trim_end_matches('/')
    }

    pub fn key_env(&self) -> &str {
        self.api_key_env
            .as_deref()
            .unwrap_or(self.format.default_key_env())
    }
}

/// A real provider reached over HTTP. Connection pooling comes from the
/// shared `reqwest::Client`.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: Option<String>,
    http: reqwest::Client,
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: HttpBackendConfig) -> Result<Self, ProviderError> {
        let key = std::env::var(config.key_env()).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: HttpBackendConfig, api_key: Option<String>) -> Result<Self, ProviderError> {
        let http = reqwest::Client::builder()
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self { config, api_key, http })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn build(&self, req: &CompletionRequest, key: &str) -> reqwest::RequestBuilder {
        let b = &req.bundle;
        let base = self.config.base_url();
        let timeout = Duration::from_millis(req.timeout_ms);
        match self.config.format {
            WireFormat::OpenAi => self
                .http
                .post(format!("{base}/chat/completions"))
                .bearer_auth(key)
                .timeout(timeout)
                .json(&json!({
                    "model": req.model,
                    "messages": [
                        {"role": "system", "content": b.system_prompt},
                        {"role": "user", "content": b.user_prompt},
                    ],
                    "max_tokens": b.max_tokens,
                })),
            WireFormat::Gemini => self
                .http
                .post(format!("{base}/models/{}:generateContent", req.model))
                .header("x-goog-api-key", key)
                .timeout(timeout)
                .json(&json!({
                    "systemInstruction": {"parts": [{"text": b.system_prompt}]},
                    "contents": [{"role": "user", "parts": [{"text": b.user_prompt}]}],
                    "generationConfig": {"maxOutputTokens": b.max_tokens},
                })),
            WireFormat::Anthropic => self
                .http
                .post(format!("{base}/messages"))
                .header("x-api-key", key)
                .header("anthropic-version", "2023-06-01")
                .timeout(timeout)
                .json(&json!({
                    "model": req.model,
                    "system": b.system_prompt,
                    "max_tokens": b.max_tokens,
                    "messages": [{"role": "user", "content": b.user_prompt}],
                })),
        }
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.name
    }

    async fn send(&self, req: &CompletionRequest) -> Result<RawCompletion, ProviderError> {
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| ProviderError::MissingCredentials(self.config.key_env().to_string()))?;
        let resp = self.build(req, key).send().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout(req.timeout_ms)
            } else {
                ProviderError::Transport {
                    message: e.to_string(),
                    retryable: true,
                }
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().await.map_err(|e| ProviderError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, body));
        }
        let v: Value = serde_json::from_str(&body)
            .map_err(|e| ProviderError::Integrity(format!("response is not JSON: {e}")))?;
        parse_response(self.config.format, &v)
    }
}

fn classify_status(status: u16, body: String) -> ProviderError {
    let message: String = body.chars().take(500).collect();
    match status {
        401 | 403 => ProviderError::Auth { status, message },
        408 => ProviderError::Timeout(0),
        429 => ProviderError::RateLimited(message),
        500..=599 => ProviderError::Transport {
            message: format!("HTTP {status}: {message}"),
            retryable: true,
        },
        _ => ProviderError::BadRequest { status, message },
    }
}

fn missing(field: &str) -> ProviderError {
    ProviderError::Integrity(format!("missing `{field}`"))
}

fn token_field(v: &Value, path: &[&str]) -> Option<u32> {
    let mut cur = v;
    for p in path {
        cur = cur.get(p)?;
    }
    cur.as_u64().and_then(|n| u32::try_from(n).ok())
}

/// Extracts text and usage from a provider response body.
pub(crate) fn parse_response(format: WireFormat, v: &Value) -> Result<RawCompletion, ProviderError> {
    let (text, input, output) = match format {
        WireFormat::OpenAi => {
            let text = v
                .pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .ok_or_else(|| missing("choices[0].message.content"))?
                .to_string();
            (
                text,
                token_field(v, &["usage", "prompt_tokens"]),
                token_field(v, &["usage", "completion_tokens"]),
            )
        }
        WireFormat::Gemini => {
            let parts = v
                .pointer("/candidates/0/content/parts")
                .and_then(Value::as_array)
                .ok_or_else(|| missing("candidates[0].content.parts"))?;
            let text = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<String>();
            (
                text,
                token_field(v, &["usageMetadata", "promptTokenCount"]),
                token_field(v, &["usageMetadata", "candidatesTokenCount"]),
            )
        }
        WireFormat::Anthropic => {
            let blocks = v
                .get("content")
                .and_then(Value::as_array)
                .ok_or_else(|| missing("content"))?;
            let text = blocks
                .iter()
                .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
                .filter_map(|b| b.get("text").and_then(Value::as_str))
                .collect::<String>();
            (
                text,
                token_field(v, &["usage", "input_tokens"]),
                token_field(v, &["usage", "output_tokens"]),
            )
        }
    };
    let usage = match (input, output) {
        (Some(input_tokens), Some(output_tokens)) => Some(Usage {
            input_tokens,
            output_tokens,
        }),
        _ => None,
    };
    Ok(RawCompletion { text, usage })
}
