//! Cost-aware response template routing for LLM gateways.
//!
//! A small classifier reads a query embedding and predicts which of five
//! response templates (each a system prompt plus a hard `max_tokens` cap) the
//! query needs. Low-confidence predictions fall back to the verbose template.

pub mod accounting;
pub mod bench;
pub mod classifier;
pub mod dataset;
pub mod domain;
pub mod embedding;
pub mod fixtures;
pub mod providers;
pub mod router;
pub mod templates;
