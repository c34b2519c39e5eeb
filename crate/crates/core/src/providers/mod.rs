//! Chat-completion providers: real wire backends, a calibrated mock, retrying
//! client, token counting and a JSON-lines audit log.

mod audit;
mod mock;
mod tokens;
mod wire;

pub use audit::{AuditLog, AuditRecord};
pub use mock::{calibrate_location, censored_mean, MockProvider, ProviderProfile, DEFAULT_DISPERSION};
pub use tokens::{count_tokens, ApproxTokenCounter, TokenCounter};
pub use wire::{HttpBackend, HttpBackendConfig, WireFormat};

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates::PromptBundle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("authentication rejected (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("missing credentials: environment variable {0} is not set")]
    MissingCredentials(String),
    #[error("request rejected (HTTP {status}): {message}")]
    BadRequest { status: u16, message: String },
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("malformed provider response: {0}")]
    Integrity(String),
    #[error("provider config: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::RateLimited(_) | Self::Timeout(_) => true,
            Self::Transport { retryable, .. } => *retryable,
            _ => false,
        }
    }
}

/// One completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub provider: String,
    pub model: String,
    pub bundle: PromptBundle,
    pub timeout_ms: u64,
    /// Maximum number of attempts, first try included.
    pub retry_budget: u32,
}

impl CompletionRequest {
    pub fn new(provider: impl Into<String>, model: impl Into<String>, bundle: PromptBundle) -> Self {
        Self {
            provider: provider.into(),
            model: model.into(),
            bundle,
            timeout_ms: 30_000,
            retry_budget: 3,
        }
    }
}

/// Token usage as reported by a provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u32,
    pub output_tokens: u32,
}

/// What a backend returns for one successful attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub output_tokens: u32,
    pub input_tokens: u32,
    pub provider_reported_usage: Option<Usage>,
    pub latency_ms: u64,
    pub success: bool,
    pub attempts: u32,
    /// Last error when `success` is false.
    pub error: Option<String>,
}

/// A chat-completion backend performing single attempts.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    async fn send(&self, req: &CompletionRequest) -> Result<RawCompletion, ProviderError>;
}

/// Exponential backoff: `base * 2^(attempt-1)`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.saturating_sub(1).min(20));
        Duration::from_millis(exp.min(self.max_delay_ms))
    }
}

/// Retrying front for a backend, with token accounting and optional audit log.
#[derive(Clone)]
pub struct ProviderClient {
    backend: Arc<dyn ChatBackend>,
    counter: Arc<dyn TokenCounter>,
    retry: RetryPolicy,
    audit: Option<Arc<AuditLog>>,
}

impl std::fmt::Debug for ProviderClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderClient")
            .field("backend", &self.backend.name())
            .field("counter", &self.counter.name())
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl ProviderClient {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            counter: Arc::new(ApproxTokenCounter),
            retry: RetryPolicy::default(),
            audit: None,
        }
    }

    pub fn with_counter(mut self, counter: Arc<dyn TokenCounter>) -> Self {
        self.counter = counter;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn name(&self) -> &str {
        self.backend.name()
    }

    /// Sends the request, retrying transient failures with backoff.
    ///
    /// Non-retryable failures (auth, bad request, malformed response) are
    /// returned as errors. Running out of attempts on transient failures yields
    /// `Ok` with `success == false`.
    pub async fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let started = Instant::now();
        let budget = req.retry_budget.max(1);
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            let attempt = tokio::time::timeout(Duration::from_millis(req.timeout_ms), self.backend.send(req))
                .await
                .unwrap_or(Err(ProviderError::Timeout(req.timeout_ms)));
            match attempt {
                Ok(raw) => break Ok(raw),
                Err(e) if e.is_retryable() && attempts < budget => {
                    tracing::debug!(provider = self.name(), attempts, error = %e, "retrying");
                    tokio::time::sleep(self.retry.delay(attempts)).await;
                }
                Err(e) => break Err(e),
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        let result = match outcome {
            Ok(raw) => self.finish(req, raw, attempts, latency_ms),
            Err(e) if e.is_retryable() => Ok(CompletionResponse {
                text: String::new(),
                output_tokens: 0,
                input_tokens: 0,
                provider_reported_usage: None,
                latency_ms,
                success: false,
                attempts,
                error: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        };
        if let Some(log) = &self.audit {
            log.record(req, &result);
        }
        result
    }

    fn finish(
        &self,
        req: &CompletionRequest,
        raw: RawCompletion,
        attempts: u32,
        latency_ms: u64,
    ) -> Result<CompletionResponse, ProviderError> {
        let (input_tokens, output_tokens) = match raw.usage {
            Some(u) => (u.input_tokens, u.output_tokens),
            None => (
                self.counter.count(&req.bundle.system_prompt) + self.counter.count(&req.bundle.user_prompt),
                self.counter.count(&raw.text),
            ),
        };
        if raw.usage.is_some() && output_tokens > req.bundle.max_tokens {
            return Err(ProviderError::Integrity(format!(
                "provider reported {output_tokens} output tokens above max_tokens {}",
                req.bundle.max_tokens
            )));
        }
        Ok(CompletionResponse {
            text: raw.text,
            output_tokens,
            input_tokens,
            provider_reported_usage: raw.usage,
            latency_ms,
            success: true,
            attempts,
            error: None,
        })
    }
}
