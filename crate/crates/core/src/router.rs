//! Confidence-thresholded template routing with verbose fallback, optionally
//! replacing the argmax step with expected-cost minimization.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, MlpModel};
use crate::domain::{expected_cost, select_cost_aware, CostParams, DomainError, ProbVector, Query, TemplateId};
use crate::embedding::{embed, Embedder, EmbeddingCache, EmbeddingError, EmbeddingVector};

/// Default confidence threshold below which the verbose template is used.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.3;

#[derive(Debug, Error)]
pub enum RouterError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("router config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterMode {
    #[default]
    ArgmaxWithFallback,
    CostAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub confidence_threshold: f64,
    pub mode: RouterMode,
    /// Required in cost-aware mode, ignored otherwise.
    #[serde(default)]
    pub cost_params: Option<CostParams>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            mode: RouterMode::ArgmaxWithFallback,
            cost_params: None,
        }
    }
}

impl RouterConfig {
    pub fn cost_aware(cost_params: CostParams) -> Self {
        Self {
            mode: RouterMode::CostAware,
            cost_params: Some(cost_params),
            ..Self::default()
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.confidence_threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), RouterError> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(RouterError::Config(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        match (self.mode, &self.cost_params) {
            (RouterMode::CostAware, None) => {
                Err(RouterError::Config("cost_aware mode needs cost_params".into()))
            }
            (RouterMode::CostAware, Some(p)) => {
                p.validate()?;
                if p.k() != TemplateId::K {
                    return Err(RouterError::Config(format!(
                        "cost_params has {} template costs, expected {}",
                        p.k(),
                        TemplateId::K
                    )));
                }
                Ok(())
            }
            (RouterMode::ArgmaxWithFallback, _) => Ok(()),
        }
    }
}

/// The pure part of a routing decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub template: TemplateId,
    pub confidence: f64,
    pub probs: ProbVector,
    pub fallback_applied: bool,
    pub expected_cost: Option<f64>,
}

/// A decision plus timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResult {
    pub template: TemplateId,
    pub confidence: f64,
    pub probs: ProbVector,
    pub fallback_applied: bool,
    pub expected_cost: Option<f64>,
    /// Classifier plus selection only, microseconds.
    pub decision_latency_us: u64,
    /// Including embedding lookup, microseconds.
    pub total_latency_us: u64,
}

impl RouteResult {
    pub fn decision(&self) -> Decision {
        Decision {
            template: self.template.clone(),
            confidence: self.confidence,
            probs: self.probs.clone(),
            fallback_applied: self.fallback_applied,
            expected_cost: self.expected_cost,
        }
    }
}

/// Chooses a template from canonical probabilities.
///
/// If the top probability is below the threshold the verbose template is
/// returned with `fallback_applied`. Otherwise the argmax (ties to the lowest
/// canonical index) or, in cost-aware mode, the expected-cost minimizer.
pub fn decide(probs: &ProbVector, config: &RouterConfig) -> Result<Decision, RouterError> {
    if probs.len() != TemplateId::K {
        return Err(RouterError::Config(format!(
            "expected {} probabilities, got {}",
            TemplateId::K,
            probs.len()
        )));
    }
    let confidence = probs.max();
    let cost_params = match config.mode {
        RouterMode::CostAware => Some(
            config
                .cost_params
                .as_ref()
                .ok_or_else(|| RouterError::Config("cost_aware mode needs cost_params".into()))?,
        ),
        RouterMode::ArgmaxWithFallback => None,
    };
    let (index, fallback_applied, cost) = if confidence < config.confidence_threshold {
        let v = TemplateId::Verbose.canonical_index().expect("known");
        let cost = cost_params.map(|p| expected_cost(v, p, probs)).transpose()?;
        (v, true, cost)
    } else if let Some(p) = cost_params {
        let choice = select_cost_aware(p, probs)?;
        (choice.index, false, Some(choice.expected_cost))
    } else {
        (probs.argmax(), false, None)
    };
    Ok(Decision {
        template: TemplateId::from_canonical_index(index).expect("index < K"),
        confidence,
        probs: probs.clone(),
        fallback_applied,
        expected_cost: cost,
    })
}

/// Embeds, classifies and decides. Cheap to clone; all state is shared.
#[derive(Clone)]
pub struct Router {
    model: Arc<MlpModel>,
    config: RouterConfig,
    embedder: Arc<dyn Embedder>,
    cache: Arc<EmbeddingCache>,
}

impl std::fmt::Debug for Router {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Router")
            .field("config", &self.config)
            .field("embedder", &self.embedder.model_tag())
            .finish_non_exhaustive()
    }
}

impl Router {
    pub fn new(
        model: Arc<MlpModel>,
        config: RouterConfig,
        embedder: Arc<dyn Embedder>,
        cache: Arc<EmbeddingCache>,
    ) -> Result<Self, RouterError> {
        config.validate()?;
        Ok(Self {
            model,
            config,
            embedder,
            cache,
        })
    }

    pub fn config(&self) -> &RouterConfig {
        &self.config
    }

    pub fn model(&self) -> &Arc<MlpModel> {
        &self.model
    }

    pub fn cache(&self) -> &Arc<EmbeddingCache> {
        &self.cache
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    /// Routes one query. Embedding failures are returned, never papered over.
    pub async fn route(&self, query: &Query) -> Result<RouteResult, RouterError> {
        self.route_with(query, &self.config).await
    }

    /// Routes with a per-call threshold override.
    pub async fn route_with_threshold(&self, query: &Query, threshold: f64) -> Result<RouteResult, RouterError> {
        let config = self.config.clone().with_threshold(threshold);
        self.route_with(query, &config).await
    }

    /// Routes under a different configuration (threshold, mode, costs).
    pub async fn route_with(&self, query: &Query, config: &RouterConfig) -> Result<RouteResult, RouterError> {
        config.validate()?;
        query.validate()?;
        let started = Instant::now();
        let vector = embed(query, self.embedder.as_ref(), &self.cache).await?;
        let mut result = self.route_vector_with(&vector, config)?;
        result.total_latency_us = started.elapsed().as_micros() as u64;
        Ok(result)
    }

    /// Decision for an already computed embedding.
    pub fn route_vector(&self, vector: &EmbeddingVector) -> Result<RouteResult, RouterError> {
        self.route_vector_with(vector, &self.config)
    }

    fn route_vector_with(&self, vector: &EmbeddingVector, config: &RouterConfig) -> Result<RouteResult, RouterError> {
        let started = Instant::now();
        let probs = self.model.predict_proba(vector)?;
        let d = decide(&probs, config)?;
        let us = started.elapsed().as_micros() as u64;
        Ok(RouteResult {
            template: d.template,
            confidence: d.confidence,
            probs: d.probs,
            fallback_applied: d.fallback_applied,
            expected_cost: d.expected_cost,
            decision_latency_us: us,
            total_latency_us: us,
        })
    }

    /// Routes each query in order; one failure does not stop the rest.
    pub async fn route_batch(&self, queries: &[Query]) -> Vec<Result<RouteResult, RouterError>> {
        let mut out = Vec::with_capacity(queries.len());
        for q in queries {
            out.push(self.route(q).await);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn low_confidence_falls_back() {
        let d = decide(&pv(&[0.25, 0.25, 0.2, 0.15, 0.15]), &RouterConfig::default()).unwrap();
        assert_eq!(d.template, TemplateId::Verbose);
        assert!(d.fallback_applied);
        assert_eq!(d.confidence, 0.25);
    }

    #[test]
    fn certain_verbose_is_not_a_fallback() {
        let d = decide(&pv(&[0.0, 0.0, 0.0, 0.0, 1.0]), &RouterConfig::default()).unwrap();
        assert_eq!(d.template, TemplateId::Verbose);
        assert!(!d.fallback_applied);
    }

    #[test]
    fn threshold_is_strict() {
        let probs = pv(&[0.3, 0.3, 0.2, 0.1, 0.1]);
        let d = decide(&probs, &RouterConfig::default()).unwrap();
        assert!(!d.fallback_applied);
        assert_eq!(d.template, TemplateId::Minimal);
    }

    #[test]
    fn cost_aware_populates_expected_cost() {
        let params = CostParams::new(vec![1.0, 3.0, 4.0, 8.0, 10.0], 10.0, 0.0).unwrap();
        let cfg = RouterConfig::cost_aware(params);
        let d = decide(&pv(&[0.1, 0.6, 0.1, 0.1, 0.1]), &cfg).unwrap();
        assert_eq!(d.template, TemplateId::Executive);
        assert!((d.expected_cost.unwrap() - (3.0 * 0.6 + 10.0 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(RouterConfig::default().with_threshold(1.5).validate().is_err());
        let cfg = RouterConfig {
            mode: RouterMode::CostAware,
            ..RouterConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
