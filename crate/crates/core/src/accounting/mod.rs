//! Token and cost accounting against the always-verbose baseline.

mod export;
mod ledger;
mod report;

pub use export::{export_report, import_report, ReportFormat};
pub use ledger::{read_ledger, UsageLedger};
pub use report::{
    routing_accuracy, savings_vs_baseline, savings_vs_baseline_with, template_distribution, AccuracyReport, ProviderSavings,
    SavingsReport, TemplateCount, TemplateHistogram, TOTAL_ROW,
};

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ProviderPricing, TemplateId};

#[derive(Debug, Error)]
pub enum AccountingError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("ledger line {line}: {message}")]
    Ledger { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Input,
    Output,
}

/// USD cost of `tokens` at the given per-million price.
pub fn cost_of_tokens(tokens: u64, pricing: &ProviderPricing, kind: TokenKind) -> f64 {
    let per_mtok = match kind {
        TokenKind::Input => pricing.input_usd_per_mtok,
        TokenKind::Output => pricing.output_usd_per_mtok,
    };
    tokens as f64 * per_mtok / 1_000_000.0
}

/// One routed call as seen by the ledger.
///
/// `baseline_output_tokens` is the verbose-template counterfactual: measured
/// by a paired call in benchmarks, or the verbose profile mean in the gateway
/// (then `baseline_estimated` is set). A call that already used the verbose
/// template is its own baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub query_id: String,
    pub provider: String,
    pub template: TemplateId,
    pub fallback: bool,
    /// Routed without a classifier decision (embedding unavailable).
    #[serde(default)]
    pub degraded: bool,
    pub success: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub baseline_output_tokens: u64,
    #[serde(default)]
    pub baseline_estimated: bool,
    pub cost_usd: f64,
    pub baseline_cost_usd: f64,
    pub timestamp_ms: u64,
    /// Ground-truth template when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<TemplateId>,
}

impl UsageRecord {
    /// Builds a successful record and prices it.
    #[allow(clippy::too_many_arguments)]
    pub fn priced(
        query_id: impl Into<String>,
        template: TemplateId,
        fallback: bool,
        input_tokens: u64,
        output_tokens: u64,
        baseline_output_tokens: u64,
        baseline_estimated: bool,
        pricing: &ProviderPricing,
    ) -> Self {
        let input_cost = cost_of_tokens(input_tokens, pricing, TokenKind::Input);
        Self {
            query_id: query_id.into(),
            provider: pricing.provider.clone(),
            template,
            fallback,
            degraded: false,
            success: true,
            input_tokens,
            output_tokens,
            baseline_output_tokens,
            baseline_estimated,
            cost_usd: input_cost + cost_of_tokens(output_tokens, pricing, TokenKind::Output),
            baseline_cost_usd: input_cost + cost_of_tokens(baseline_output_tokens, pricing, TokenKind::Output),
            timestamp_ms: now_ms(),
            label: None,
        }
    }

    /// A call that failed after retries; carries no tokens.
    pub fn failed(query_id: impl Into<String>, provider: impl Into<String>, template: TemplateId) -> Self {
        Self {
            query_id: query_id.into(),
            provider: provider.into(),
            template,
            fallback: false,
            degraded: false,
            success: false,
            input_tokens: 0,
            output_tokens: 0,
            baseline_output_tokens: 0,
            baseline_estimated: false,
            cost_usd: 0.0,
            baseline_cost_usd: 0.0,
            timestamp_ms: now_ms(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: Option<TemplateId>) -> Self {
        self.label = label;
        self
    }

    pub fn with_degraded(mut self, degraded: bool) -> Self {
        self.degraded = degraded;
        self
    }

    pub fn validate(&self) -> Result<(), AccountingError> {
        if !(self.cost_usd >= 0.0 && self.cost_usd.is_finite()) {
            return Err(AccountingError::Input(format!(
                "record `{}`: cost {} is not a non-negative number",
                self.query_id, self.cost_usd
            )));
        }
        if !(self.baseline_cost_usd >= 0.0 && self.baseline_cost_usd.is_finite()) {
            return Err(AccountingError::Input(format!(
                "record `{}`: baseline cost {} is not a non-negative number",
                self.query_id, self.baseline_cost_usd
            )));
        }
        Ok(())
    }
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
