//! Template registry with dual-layer token control.
//!
//! Every template pairs a system prompt (the soft layer, steering response
//! style) with a hard `max_tokens` cap that is forwarded to the provider API.
//! Templates outside the known five fall back to a neutral prompt and a
//! 1000-token cap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CostParams, DomainError, ProviderPricing, Query, TemplateId};

/// Hard cap applied to templates outside the registry.
pub const DEFAULT_TOKEN_CAP: u32 = 1000;

/// System prompt used for templates outside the registry.
pub const NEUTRAL_SYSTEM_PROMPT: &str = "Answer the question.";

pub const MINIMAL_PROMPT: &str = "Answer briefly and directly";
pub const STANDARD_PROMPT: &str = "Explain your answer step by step, concisely.";
pub const VERBOSE_PROMPT: &str =
    "Give a comprehensive, detailed explanation with examples and context";
pub const TECHNICAL_PROMPT: &str = "Answer with precise technical detail and terminology.";
pub const EXECUTIVE_PROMPT: &str = "Summarize the answer for a decision-maker in a few sentences.";

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template `{0}` is not one of the five known templates")]
    UnknownTemplate(String),
    #[error("template `{template}`: max_tokens {requested} differs from the fixed cap {cap}")]
    CapMismatch {
        template: TemplateId,
        requested: u32,
        cap: u32,
    },
    #[error("template `{template}`: mean_tokens {mean} must lie in (0, {cap}]")]
    BadMeanTokens {
        template: TemplateId,
        mean: f64,
        cap: u32,
    },
    #[error("template config: {0}")]
    Config(String),
}

/// A named response template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub id: TemplateId,
    pub system_prompt: String,
    pub token_cap: u32,
    /// Expected output length `tau(t)` in tokens, used for cost estimates.
    pub mean_tokens: f64,
}

/// The fixed hard cap for a template; unknown templates get [`DEFAULT_TOKEN_CAP`].
pub fn token_cap(id: &TemplateId) -> u32 {
    match id {
        TemplateId::Minimal => 50,
        TemplateId::Executive => 150,
        TemplateId::Standard => 200,
        TemplateId::Technical => 400,
        TemplateId::Verbose => 500,
        TemplateId::Unknown(_) => DEFAULT_TOKEN_CAP,
    }
}

fn default_prompt(id: &TemplateId) -> &'static str {
    match id {
        TemplateId::Minimal => MINIMAL_PROMPT,
        TemplateId::Executive => EXECUTIVE_PROMPT,
        TemplateId::Standard => STANDARD_PROMPT,
        TemplateId::Technical => TECHNICAL_PROMPT,
        TemplateId::Verbose => VERBOSE_PROMPT,
        TemplateId::Unknown(_) => NEUTRAL_SYSTEM_PROMPT,
    }
}

/// What gets sent to a provider for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template: TemplateId,
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_tokens: u32,
}

/// Immutable map from the five known templates to their specs.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRegistry {
    specs: BTreeMap<TemplateId, TemplateSpec>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let specs = TemplateId::CANONICAL
            .iter()
            .map(|id| {
                let cap = token_cap(id);
                (
                    id.clone(),
                    TemplateSpec {
                        id: id.clone(),
                        system_prompt: default_prompt(id).to_string(),
                        token_cap: cap,
                        mean_tokens: f64::from(cap),
                    },
                )
            })
            .collect();
        Self { specs }
    }
}

/// One entry of a registry override file.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct TemplateOverride {
    pub system_prompt: Option<String>,
    pub max_tokens: Option<u32>,
    pub mean_tokens: Option<f64>,
}

impl TemplateRegistry {
    /// Applies per-template overrides.
    ///
    /// Prompts and mean lengths may change; `max_tokens`, when present, must
    /// equal the template's fixed cap.
    pub fn with_overrides(
        mut self,
        overrides: &BTreeMap<String, TemplateOverride>,
    ) -> Result<Self, TemplateError> {
        for (name, o) in overrides {
            let id = TemplateId::parse_known(name)
                .ok_or_else(|| TemplateError::UnknownTemplate(name.clone()))?;
            let spec = self.specs.get_mut(&id).expect("registry holds all known ids");
            if let Some(requested) = o.max_tokens {
                if requested != spec.token_cap {
                    return Err(TemplateError::CapMismatch {
                        template: id,
                        requested,
                        cap: spec.token_cap,
                    });
                }
            }
            if let Some(prompt) = &o.system_prompt {
                spec.system_prompt = prompt.clone();
            }
            if let Some(mean) = o.mean_tokens {
                if !(mean > 0.0 && mean <= f64::from(spec.token_cap)) {
                    return Err(TemplateError::BadMeanTokens {
                        template: id,
                        mean,
                        cap: spec.token_cap,
                    });
                }
                spec.mean_tokens = mean;
            }
        }
        Ok(self)
    }

    /// Parses a TOML override file of the form
    /// `[templates.<name>] system_prompt = "...", max_tokens = N, mean_tokens = X`.
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            templates: BTreeMap<String, TemplateOverride>,
        }
        let file: File = toml::from_str(text).map_err(|e| TemplateError::Config(e.to_string()))?;
        Self::default().with_overrides(&file.templates)
    }

    pub fn get(&self, id: &TemplateId) -> Option<&TemplateSpec> {
        self.specs.get(id)
    }

    /// Specs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &TemplateSpec> {
        self.specs.values()
    }

    pub fn token_cap(&self, id: &TemplateId) -> u32 {
        self.specs
            .get(id)
            .map(|s| s.token_cap)
            .unwrap_or(DEFAULT_TOKEN_CAP)
    }

    pub fn system_prompt(&self, id: &TemplateId) -> &str {
        self.specs
            .get(id)
            .map(|s| s.system_prompt.as_str())
            .unwrap_or(NEUTRAL_SYSTEM_PROMPT)
    }

    /// Builds the provider-facing prompt. The query text is passed through untouched.
    pub fn render_prompt(&self, query: &Query, id: &TemplateId) -> PromptBundle {
        PromptBundle {
            template: id.clone(),
            system_prompt: self.system_prompt(id).to_string(),
            user_prompt: query.text.clone(),
            max_tokens: self.token_cap(id),
        }
    }

    /// Mean output tokens `tau(t)` in canonical order.
    pub fn mean_tokens(&self) -> Vec<f64> {
        TemplateId::CANONICAL
            .iter()
            .map(|id| self.specs[id].mean_tokens)
            .collect()
    }

    /// Cost parameters `c(t) = alpha * tau(t)` for a provider's output price.
    pub fn cost_params(
        &self,
        pricing: &ProviderPricing,
        routing_cost: f64,
    ) -> Result<CostParams, DomainError> {
        CostParams::from_output_price(pricing.output_usd_per_mtok, &self.mean_tokens(), routing_cost)
    }
}

/// Renders with the default registry.
pub fn render_prompt(query: &Query, id: &TemplateId) -> PromptBundle {
    TemplateRegistry::default().render_prompt(query, id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> Query {
        Query::new("q", text).unwrap()
    }

    #[test]
    fn caps_match_fixed_values() {
        assert_eq!(token_cap(&TemplateId::Minimal), 50);
        assert_eq!(token_cap(&TemplateId::Standard), 200);
        assert_eq!(token_cap(&TemplateId::Verbose), 500);
        assert_eq!(token_cap(&TemplateId::Technical), 400);
        assert_eq!(token_cap(&TemplateId::Executive), 150);
        assert_eq!(token_cap(&TemplateId::Unknown("experimental".into())), 1000);
    }

    #[test]
    fn registry_contains_exactly_five() {
        let reg = TemplateRegistry::default();
        let ids: Vec<_> = reg.iter().map(|s| s.id.clone()).collect();
        assert_eq!(ids, TemplateId::CANONICAL.to_vec());
        for spec in reg.iter() {
            assert!(spec.mean_tokens <= f64::from(spec.token_cap));
        }
    }

    #[test]
    fn minimal_and_verbose_prompts() {
        let b = render_prompt(&q("What is 2+2?"), &TemplateId::Minimal);
        assert_eq!(b.system_prompt, "Answer briefly and directly");
        assert_eq!(b.max_tokens, 50);
        let b = render_prompt(&q("Why is the sky blue?"), &TemplateId::Verbose);
        assert_eq!(
            b.system_prompt,
            "Give a comprehensive, detailed explanation with examples and context"
        );
        assert_eq!(b.max_tokens, 500);
    }

    #[test]
    fn unknown_template_uses_neutral_default() {
        let b = render_prompt(&q("hi"), &TemplateId::Unknown("experimental".into()));
        assert_eq!(b.max_tokens, 1000);
        assert_eq!(b.system_prompt, NEUTRAL_SYSTEM_PROMPT);
    }

    #[test]
    fn query_text_passes_through_byte_identical() {
        let text = "  Tabs\tand  odd   spacing, ünïcödé ✓ \n";
        let b = render_prompt(&q(text), &TemplateId::Technical);
        assert_eq!(b.user_prompt.as_bytes(), text.as_bytes());
    }

    #[test]
    fn overrides_change_prompts_not_caps() {
        let reg = TemplateRegistry::from_toml(
            r#"
[templates.minimal]
system_prompt = "Be terse."
max_tokens = 50
mean_tokens = 30.0
"#,
        )
        .unwrap();
        let spec = reg.get(&TemplateId::Minimal).unwrap();
        assert_eq!(spec.system_prompt, "Be terse.");
        assert_eq!(spec.mean_tokens, 30.0);
        assert_eq!(spec.token_cap, 50);

        let err = TemplateRegistry::from_toml("[templates.verbose]\nmax_tokens = 800\n").unwrap_err();
        assert!(matches!(err, TemplateError::CapMismatch { requested: 800, cap: 500, .. }));
        let err = TemplateRegistry::from_toml("[templates.fancy]\nmean_tokens = 8.0\n").unwrap_err();
        assert!(matches!(err, TemplateError::UnknownTemplate(_)));
        let err = TemplateRegistry::from_toml("[templates.minimal]\nmean_tokens = 80.0\n").unwrap_err();
        assert!(matches!(err, TemplateError::BadMeanTokens { .. }));
    }

    #[test]
    fn cost_params_from_registry() {
        let reg = TemplateRegistry::default();
        let pricing = crate::domain::preset("openai", "gpt-4o-mini").unwrap();
        let params = reg.cost_params(&pricing, 0.0).unwrap();
        assert!((params.per_template_cost[0] - 0.00003).abs() < 1e-18);
        assert!((params.fallback_cost - 0.0003).abs() < 1e-18);
    }
}
