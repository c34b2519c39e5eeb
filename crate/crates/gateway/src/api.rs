//! HTTP API.
//!
//! Every handler takes one snapshot of the current [`GatewayState`] and uses
//! it for the whole request, so a reload never changes configuration under an
//! in-flight request. Ledger appends are the only serialized step.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::json;
use template_router::accounting::{
    routing_accuracy, savings_vs_baseline, AccuracyReport, SavingsReport, UsageLedger, UsageRecord,
};
use template_router::domain::{Query, TemplateId};
use template_router::providers::CompletionRequest;
use template_router::router::{RouterError, RouterMode};
use tokio::sync::Semaphore;

use crate::config::GatewayConfig;
use crate::state::{GatewayState, Shared};
use crate::GatewayError;

/// The running service: swappable state plus process-lifetime resources.
pub struct Gateway {
    state: RwLock<Arc<GatewayState>>,
    shared: Shared,
    ledger: Arc<UsageLedger>,
    limiter: Arc<Semaphore>,
    started: Instant,
    api_key: Option<String>,
    config_path: Option<PathBuf>,
    generation: AtomicU64,
    request_seq: AtomicU64,
}

impl Gateway {
    /// Builds the service. Refuses to start when the model cannot be loaded.
    pub fn new(config: GatewayConfig, config_path: Option<PathBuf>) -> Result<Arc<Self>, GatewayError> {
        let shared = Shared::from_config(&config)?;
        let ledger = match &config.ledger_path {
            Some(p) => UsageLedger::open(p)?,
            None => UsageLedger::in_memory(),
        };
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| GatewayError::Config(format!("api_key_env `{var}` is not set")))?,
            ),
            None => None,
        };
        let limiter = Arc::new(Semaphore::new(config.concurrency_limit));
        let state = GatewayState::build(config, &shared, 1)?;
        Ok(Arc::new(Self {
            state: RwLock::new(Arc::new(state)),
            shared,
            ledger: Arc::new(ledger),
            limiter,
            started: Instant::now(),
            api_key,
            config_path,
            generation: AtomicU64::new(1),
            request_seq: AtomicU64::new(0),
        }))
    }

    pub fn state(&self) -> Arc<GatewayState> {
        self.state.read().clone()
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    /// Re-reads the config file given at startup.
    pub fn reload(&self) -> Result<u64, GatewayError> {
        let path = self
            .config_path
            .as_ref()
            .ok_or_else(|| GatewayError::Config("no config file to reload from".into()))?;
        self.reload_with(GatewayConfig::load(path)?)
    }

    /// Swaps in a new model, templates, pricing, router and providers.
    /// Listen address, concurrency limit, embedding backend, cache and ledger
    /// keep their startup values.
    pub fn reload_with(&self, config: GatewayConfig) -> Result<u64, GatewayError> {
        let generation = self.generation.fetch_add(1, Ordering::SeqCst) + 1;
        let next = GatewayState::build(config, &self.shared, generation)?;
        *self.state.write() = Arc::new(next);
        tracing::info!(generation, "configuration reloaded");
        Ok(generation)
    }

    fn request_id(&self, given: Option<String>) -> String {
        given.unwrap_or_else(|| format!("req-{}", self.request_seq.fetch_add(1, Ordering::Relaxed)))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    degraded: bool,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            degraded: false,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message, "degraded": self.degraded}});
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

fn router_error(e: RouterError) -> ApiError {
    match e {
        RouterError::Domain(e) => ApiError::bad_request(e.to_string()),
        RouterError::Config(m) => ApiError::bad_request(m),
        RouterError::Embedding(e) => ApiError {
            degraded: true,
            ..ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "embedding_unavailable", e.to_string())
        },
        RouterError::Classifier(e) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "classifier_error", e.to_string()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub mode: Option<RouterMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResponse {
    pub id: String,
    pub template: TemplateId,
    pub confidence: f64,
    /// Probabilities in canonical order: minimal, executive, standard, technical, verbose.
    pub probs: Vec<f64>,
    pub fallback_applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_cost: Option<f64>,
    pub decision_latency_us: u64,
    pub total_latency_us: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompleteRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub provider: Option<String>,
    #[serde(default)]
    pub template_override: Option<String>,
    /// Ground-truth template, for live accuracy in `/v1/stats`.
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub id: String,
    pub provider: String,
    pub model: String,
    pub template: TemplateId,
    pub fallback_applied: bool,
    pub degraded: bool,
    pub response_text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// USD for reported input plus output tokens.
    pub cost: f64,
    /// Estimated verbose output tokens for this provider.
    pub baseline_estimate: u64,
    pub baseline_cost: f64,
    pub attempts: u32,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub uptime_seconds: f64,
    pub generation: u64,
    pub ledger_records: usize,
    pub savings: SavingsReport,
    #[serde(default)]
    pub accuracy: Option<AccuracyReport>,
}

async fn route(
    State(gw): State<Arc<Gateway>>,
    body: Result<Json<RouteRequest>, JsonRejection>,
) -> Result<Json<RouteResponse>, ApiError> {
    let Json(req) = body?;
    let state = gw.state();
    let id = gw.request_id(req.id);
    let query = Query::new(id.clone(), req.text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut cfg = state.router.config().clone();
    if let Some(t) = req.threshold {
        cfg.confidence_threshold = t;
    }
    if let Some(mode) = req.mode {
        cfg.mode = mode;
        if mode == RouterMode::CostAware && cfg.cost_params.is_none() {
            cfg.cost_params = Some(state.cost_params.clone());
        }
    }
    let r = state.router.route_with(&query, &cfg).await.map_err(router_error)?;
    Ok(Json(RouteResponse {
        id,
        template: r.template,
        confidence: r.confidence,
        probs: r.probs.into_inner(),
        fallback_applied: r.fallback_applied,
        expected_cost: r.expected_cost,
        decision_latency_us: r.decision_latency_us,
        total_latency_us: r.total_latency_us,
    }))
}

async fn complete(
    State(gw): State<Arc<Gateway>>,
    body: Result<Json<CompleteRequest>, JsonRejection>,
) -> Result<Json<CompleteResponse>, ApiError> {
    let Json(req) = body?;
    let state = gw.state();
    let id = gw.request_id(req.id);
    let query = Query::new(id.clone(), req.text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (provider_name, provider) = state.provider(req.provider.as_deref()).ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "unknown_provider",
            format!("provider `{}` is not configured", req.provider.as_deref().unwrap_or_default()),
        )
    })?;
    let label = match &req.label {
        Some(l) => Some(TemplateId::parse_known(l).ok_or_else(|| ApiError::bad_request(format!("unknown label `{l}`")))?),
        None => None,
    };

    let (template, fallback, degraded) = match &req.template_override {
        Some(name) if name.trim().is_empty() => return Err(ApiError::bad_request("empty template_override")),
        Some(name) => (name.parse::<TemplateId>().expect("infallible"), false, false),
        None => match state.router.route(&query).await {
            Ok(r) => (r.template, r.fallback_applied, false),
            Err(RouterError::Embedding(e)) => {
                tracing::warn!(id = %id, error = %e, "embedding unavailable, degrading to verbose");
                (TemplateId::Verbose, false, true)
            }
            Err(e) => return Err(router_error(e)),
        },
    };

    let bundle = state.registry.render_prompt(&query, &template);
    let mut call = CompletionRequest::new(provider_name, &provider.pricing.model, bundle);
    call.timeout_ms = provider.timeout_ms;
    call.retry_budget = provider.retry_budget;
    let outcome = provider.client.complete(&call).await;

    let resp = match outcome {
        Ok(r) if r.success => r,
        other => {
            let message = match other {
                Ok(r) => r.error.unwrap_or_else(|| "provider failed".into()),
                Err(e) => e.to_string(),
            };
            let record = UsageRecord::failed(&id, provider_name, template)
                .with_degraded(degraded)
                .with_label(label);
            gw.ledger.append(record).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "ledger_error", e.to_string())
            })?;
            return Err(ApiError {
                degraded,
                ..ApiError::new(StatusCode::BAD_GATEWAY, "provider_failed", message)
            });
        }
    };

    let baseline = provider.baseline_verbose_tokens.round() as u64;
    let record = UsageRecord::priced(
        &id,
        template.clone(),
        fallback,
        u64::from(resp.input_tokens),
        u64::from(resp.output_tokens),
        baseline,
        true,
        &provider.pricing,
    )
    .with_degraded(degraded)
    .with_label(label);
    let (cost, baseline_cost) = (record.cost_usd, record.baseline_cost_usd);
    gw.ledger
        .append(record)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "ledger_error", e.to_string()))?;

    Ok(Json(CompleteResponse {
        id,
        provider: provider_name.to_string(),
        model: provider.pricing.model.clone(),
        template,
        fallback_applied: fallback,
        degraded,
        response_text: resp.text,
        input_tokens: u64::from(resp.input_tokens),
        output_tokens: u64::from(resp.output_tokens),
        cost,
        baseline_estimate: baseline,
        baseline_cost,
        attempts: resp.attempts,
        latency_ms: resp.latency_ms,
    }))
}

async fn stats(State(gw): State<Arc<Gateway>>) -> Result<Json<StatsResponse>, ApiError> {
    let records = gw.ledger.snapshot();
    let internal = |e: template_router::accounting::AccountingError| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "report_error", e.to_string())
    };
    let savings = savings_vs_baseline(&records).map_err(internal)?;
    let (preds, labels): (Vec<TemplateId>, Vec<TemplateId>) = records
        .iter()
        .filter_map(|r| r.label.clone().map(|l| (r.template.clone(), l)))
        .unzip();
    let accuracy = if labels.is_empty() {
        None
    } else {
        Some(routing_accuracy(&preds, &labels).map_err(internal)?)
    };
    Ok(Json(StatsResponse {
        uptime_seconds: gw.started.elapsed().as_secs_f64(),
        generation: gw.state().generation,
        ledger_records: records.len(),
        savings,
        accuracy,
    }))
}

async fn reload(State(gw): State<Arc<Gateway>>) -> Result<Json<serde_json::Value>, ApiError> {
    let generation = gw
        .reload()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "reload_failed", e.to_string()))?;
    Ok(Json(json!({"generation": generation})))
}

async fn health() -> &'static str {
    "ok"
}

async fn check_key(State(gw): State<Arc<Gateway>>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(expected) = &gw.api_key {
        let bearer = headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        let header = headers.get("x-api-key").and_then(|v| v.to_str().ok());
        if bearer != Some(expected.as_str()) && header != Some(expected.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong API key").into_response();
        }
    }
    next.run(req).await
}

async fn limit(State(gw): State<Arc<Gateway>>, req: Request, next: Next) -> Response {
    let Ok(_permit) = gw.limiter.clone().acquire_owned().await else {
        return ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "service is stopping").into_response();
    };
    next.run(req).await
}

/// The axum application for a gateway.
pub fn app(gw: Arc<Gateway>) -> Router {
    let api = Router::new()
        .route("/v1/route", post(route))
        .route("/v1/complete", post(complete))
        .route("/v1/stats", get(stats))
        .route("/v1/reload", post(reload))
        .layer(middleware::from_fn_with_state(gw.clone(), limit))
        .layer(middleware::from_fn_with_state(gw.clone(), check_key));
    Router::new()
        .route("/healthz", get(health))
        .merge(api)
        .with_state(gw)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    gw: Arc<Gateway>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "gateway listening");
    axum::serve(listener, app(gw)).with_graceful_shutdown(shutdown).await
}
