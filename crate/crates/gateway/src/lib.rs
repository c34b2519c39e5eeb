//! HTTP gateway and operator CLI for `template-router`.
//!
//! The service exposes `POST /v1/route`, `POST /v1/complete`, `GET /v1/stats`
//! and `POST /v1/reload`; the CLI wraps training, evaluation, routing,
//! benchmarking, serving and ledger reports.

pub mod api;
pub mod cli;
pub mod config;
pub mod state;

pub use api::{app, serve, Gateway};
pub use config::GatewayConfig;
pub use state::GatewayState;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(#[from] template_router::classifier::ClassifierError),
    #[error(transparent)]
    Router(#[from] template_router::router::RouterError),
    #[error(transparent)]
    Embedding(#[from] template_router::embedding::EmbeddingError),
    #[error(transparent)]
    Cache(#[from] template_router::embedding::CacheError),
    #[error(transparent)]
    Provider(#[from] template_router::providers::ProviderError),
    #[error(transparent)]
    Accounting(#[from] template_router::accounting::AccountingError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}
