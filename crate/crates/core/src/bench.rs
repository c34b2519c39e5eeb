//! Paired routed-versus-verbose benchmark harness.
//!
//! Every query is routed once. Each provider then receives two calls: one
//! with the routed template and one with the verbose template. The verbose
//! call's output length is the measured baseline for that query, so savings
//! come from real paired counts rather than profile means.

use std::time::Instant;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::{
    routing_accuracy, savings_vs_baseline, AccountingError, AccuracyReport, SavingsReport, TemplateHistogram,
    UsageRecord,
};
use crate::classifier::{ClassifierError, LabeledData};
use crate::dataset::LabeledQuery;
use crate::domain::{ProviderPricing, Query, TemplateId};
use crate::embedding::{embed_all, Embedder, EmbeddingCache, EmbeddingError};
use crate::providers::{CompletionRequest, ProviderClient, ProviderError};
use crate::router::Router;
use crate::templates::TemplateRegistry;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bench config: {0}")]
    Config(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
}

/// A provider under test.
pub struct BenchProvider {
    pub client: ProviderClient,
    pub pricing: ProviderPricing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Queries in flight at once.
    pub concurrency: usize,
    pub timeout_ms: u64,
    pub retry_budget: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            concurrency: 16,
            timeout_ms: 30_000,
            retry_budget: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub queries: usize,
    pub savings: SavingsReport,
    /// Routed templates, one entry per query.
    pub routed: TemplateHistogram,
    /// Present when every query carries a label.
    pub accuracy: Option<AccuracyReport>,
    pub wall_clock_seconds: f64,
}

pub struct BenchOutcome {
    pub records: Vec<UsageRecord>,
    pub report: BenchReport,
}

struct Routed {
    template: TemplateId,
    fallback: bool,
    degraded: bool,
}

/// Embeds labeled queries into a training matrix.
pub async fn embed_labeled(
    items: &[LabeledQuery],
    embedder: &dyn Embedder,
    cache: &EmbeddingCache,
) -> Result<LabeledData, BenchError> {
    let texts: Vec<String> = items.iter().map(|q| q.query.text.clone()).collect();
    let vectors = embed_all(&texts, embedder, cache).await?;
    Ok(LabeledData::from_embeddings(
        &vectors,
        items.iter().map(|q| q.label.clone()).collect(),
    )?)
}

/// Runs the paired comparison. `labels`, when given, must align with `queries`.
pub async fn run_bench(
    queries: &[Query],
    labels: Option<&[TemplateId]>,
    router: &Router,
    registry: &TemplateRegistry,
    providers: &[BenchProvider],
    config: &BenchConfig,
) -> Result<BenchOutcome, BenchError> {
    if providers.is_empty() {
        return Err(BenchError::Config("no providers selected".into()));
    }
    if config.concurrency == 0 {
        return Err(BenchError::Config("concurrency must be at least 1".into()));
    }
    if labels.is_some_and(|l| l.len() != queries.len()) {
        return Err(BenchError::Config("labels and queries differ in length".into()));
    }
    let started = Instant::now();

    let per_query: Vec<(Routed, Vec<UsageRecord>)> = stream::iter(queries.iter().enumerate())
        .map(|(i, q)| {
            let label = labels.map(|l| l[i].clone());
            bench_one(q, label, router, registry, providers, config)
        })
        .buffered(config.concurrency)
        .collect()
        .await;

    let routed_templates: Vec<TemplateId> = per_query.iter().map(|(r, _)| r.template.clone()).collect();
    let records: Vec<UsageRecord> = per_query.into_iter().flat_map(|(_, recs)| recs).collect();
    let accuracy = match labels {
        Some(l) if !l.is_empty() => Some(routing_accuracy(&routed_templates, l)?),
        _ => None,
    };
    let report = BenchReport {
        queries: queries.len(),
        savings: savings_vs_baseline(&records)?,
        routed: TemplateHistogram::from_templates(&routed_templates),
        accuracy,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(BenchOutcome { records, report })
}

async fn bench_one(
    query: &Query,
    label: Option<TemplateId>,
    router: &Router,
    registry: &TemplateRegistry,
    providers: &[BenchProvider],
    config: &BenchConfig,
) -> (Routed, Vec<UsageRecord>) {
    let routed = match router.route(query).await {
        Ok(r) => Routed {
            template: r.template,
            fallback: r.fallback_applied,
            degraded: false,
        },
        Err(e) => {
            tracing::warn!(query = %query.id, error = %e, "routing failed, using verbose");
            Routed {
                template: TemplateId::Verbose,
                fallback: false,
                degraded: true,
            }
        }
    };
    let routed_bundle = registry.render_prompt(query, &routed.template);
    let verbose_bundle = registry.render_prompt(query, &TemplateId::Verbose);

    let mut records = Vec::with_capacity(providers.len());
    for p in providers {
        let request = |bundle| {
            let mut req = CompletionRequest::new(&p.pricing.provider, &p.pricing.model, bundle);
            req.timeout_ms = config.timeout_ms;
            req.retry_budget = config.retry_budget;
            req
        };
        let (routed_req, verbose_req) = (request(routed_bundle.clone()), request(verbose_bundle.clone()));
        let (actual, baseline) = tokio::join!(p.client.complete(&routed_req), p.client.complete(&verbose_req));
        let record = match (ok(actual), ok(baseline)) {
            (Some(a), Some(b)) => UsageRecord::priced(
                &query.id,
                routed.template.clone(),
                routed.fallback,
                u64::from(a.input_tokens),
                u64::from(a.output_tokens),
                u64::from(b.output_tokens),
                false,
                &p.pricing,
            ),
            _ => UsageRecord::failed(&query.id, &p.pricing.provider, routed.template.clone()),
        };
        records.push(record.with_degraded(routed.degraded).with_label(label.clone()));
    }
    (routed, records)
}

fn ok(
    r: Result<crate::providers::CompletionResponse, ProviderError>,
) -> Option<crate::providers::CompletionResponse> {
    match r {
        Ok(resp) if resp.success => Some(resp),
        Ok(resp) => {
            tracing::warn!(error = ?resp.error, "completion failed after retries");
            None
        }
        Err(e) => {
            tracing::warn!(error = %e, "completion failed");
            None
        }
    }
}
