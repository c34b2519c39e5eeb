use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, ProviderError};

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp_ms: u64,
    pub provider: String,
    pub model: String,
    pub template: String,
    pub max_tokens: u32,
    pub system_prompt: String,
    pub user_prompt: String,
    pub success: bool,
    pub attempts: Option<u32>,
    pub input_tokens: Option<u32>,
    pub output_tokens: Option<u32>,
    pub latency_ms: Option<u64>,
    pub response_text: Option<String>,
    pub error: Option<String>,
}

/// Append-only JSON-lines log of provider calls.
#[derive(Debug)]
pub struct AuditLog {
    out: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub(crate) fn record(&self, req: &CompletionRequest, result: &Result<CompletionResponse, ProviderError>) {
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let ok = result.as_ref().ok();
        let rec = AuditRecord {
            timestamp_ms,
            provider: req.provider.clone(),
            model: req.model.clone(),
            template: req.bundle.template.to_string(),
            max_tokens: req.bundle.max_tokens,
            system_prompt: req.bundle.system_prompt.clone(),
            user_prompt: req.bundle.user_prompt.clone(),
            success: ok.is_some_and(|r| r.success),
            attempts: ok.map(|r| r.attempts),
            input_tokens: ok.map(|r| r.input_tokens),
            output_tokens: ok.map(|r| r.output_tokens),
            latency_ms: ok.map(|r| r.latency_ms),
            response_text: ok.filter(|r| r.success).map(|r| r.text.clone()),
            error: match result {
                Ok(r) => r.error.clone(),
                Err(e) => Some(e.to_string()),
            },
        };
        let mut out = self.out.lock();
        let written = serde_json::to_writer(&mut *out, &rec)
            .map_err(std::io::Error::from)
            .and_then(|_| out.write_all(b"\n"))
            .and_then(|_| out.flush());
        if let Err(e) = written {
            tracing::warn!(error = %e, "audit log write failed");
        }
    }
}
