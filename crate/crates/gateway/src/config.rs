//! Gateway configuration file (TOML).
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! model_path = "model.bin"
//! templates_path = "templates.toml"   # optional registry overrides
//! pricing_path = "pricing.toml"       # optional pricing overrides
//! ledger_path = "ledger.jsonl"        # optional; in-memory when absent
//! audit_path = "audit.jsonl"          # optional provider audit log
//! concurrency_limit = 256
//! default_provider = "gemini"
//! api_key_env = "GATEWAY_API_KEY"     # optional static key check
//!
//! [router]
//! confidence_threshold = 0.3
//! mode = "argmax_with_fallback"       # or "cost_aware"
//!
//! [embedding]
//! backend = "local"                   # local | openai | disabled
//! cache_path = "embeddings.bin"
//!
//! [[providers]]
//! name = "gemini"
//! kind = "mock"                       # profile defaults to the name
//!
//! [[providers]]
//! name = "openai-live"
//! kind = "http"
//! format = "openai"
//! model = "gpt-4o-mini"
//! pricing = "openai"                  # pricing table provider key
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use template_router::domain::DEFAULT_ROUTING_COST_USD;
use template_router::embedding::OpenAiEmbedderConfig;
use template_router::providers::{ProviderProfile, WireFormat};
use template_router::router::{RouterMode, DEFAULT_CONFIDENCE_THRESHOLD};

use crate::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub model_path: PathBuf,
    #[serde(default)]
    pub templates_path: Option<PathBuf>,
    #[serde(default)]
    pub pricing_path: Option<PathBuf>,
    #[serde(default)]
    pub ledger_path: Option<PathBuf>,
    #[serde(default)]
    pub audit_path: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default)]
    pub default_provider: Option<String>,
    /// Environment variable holding the service API key. No check when unset.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub router: RouterSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default = "default_providers")]
    pub providers: Vec<ProviderSection>,
}

fn default_listen() -> SocketAddr {
    "127.0.0.1:8080".parse().expect("valid literal")
}

fn default_concurrency() -> usize {
    256
}

fn default_providers() -> Vec<ProviderSection> {
    ["gemini", "openai", "anthropic"]
        .into_iter()
        .map(ProviderSection::mock)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterSection {
    pub confidence_threshold: f64,
    pub mode: RouterMode,
    pub routing_cost_usd: f64,
}

impl Default for RouterSection {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            mode: RouterMode::ArgmaxWithFallback,
            routing_cost_usd: DEFAULT_ROUTING_COST_USD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingBackend {
    /// Offline feature-hashing embedder.
    #[default]
    Local,
    /// OpenAI-compatible `/embeddings` endpoint.
    Openai,
    /// Always fails; exercises degraded mode.
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub backend: EmbeddingBackend,
    pub cache_path: Option<PathBuf>,
    pub openai: OpenAiEmbedderConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub name: String,
    pub kind: ProviderKind,
    /// Model id; defaults to the mock profile's model.
    #[serde(default)]
    pub model: Option<String>,
    /// Mock profile preset (`gemini`, `openai`, `anthropic`); defaults to `name`.
    #[serde(default)]
    pub profile: Option<String>,
    /// Full mock profile, instead of a preset.
    #[serde(default)]
    pub custom_profile: Option<ProviderProfile>,
    #[serde(default)]
    pub format: Option<WireFormat>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Provider key in the pricing table; defaults to `name`.
    #[serde(default)]
    pub pricing: Option<String>,
    /// Verbose-template output estimate for gateway baselines.
    #[serde(default)]
    pub baseline_verbose_tokens: Option<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_attempts")]
    pub retry_budget: u32,
}

fn default_timeout() -> u64 {
    30_000
}

fn default_attempts() -> u32 {
    3
}

impl ProviderSection {
    pub fn mock(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ProviderKind::Mock,
            model: None,
            profile: None,
            custom_profile: None,
            format: None,
            base_url: None,
            api_key_env: None,
            pricing: None,
            baseline_verbose_tokens: None,
            timeout_ms: default_timeout(),
            retry_budget: default_attempts(),
        }
    }
}

impl GatewayConfig {
    /// Minimal config for a model file with default mock providers.
    pub fn for_model(model_path: impl Into<PathBuf>) -> Self {
        Self {
            listen: default_listen(),
            model_path: model_path.into(),
            templates_path: None,
            pricing_path: None,
            ledger_path: None,
            audit_path: None,
            concurrency_limit: default_concurrency(),
            default_provider: None,
            api_key_env: None,
            router: RouterSection::default(),
            embedding: EmbeddingSection::default(),
            providers: default_providers(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let cfg: Self = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_relative(dir);
        }
        Ok(cfg)
    }

    fn resolve_relative(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.model_path);
        for p in [
            &mut self.templates_path,
            &mut self.pricing_path,
            &mut self.ledger_path,
            &mut self.audit_path,
            &mut self.embedding.cache_path,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.concurrency_limit == 0 {
            return Err(GatewayError::Config("concurrency_limit must be at least 1".into()));
        }
        if self.providers.is_empty() {
            return Err(GatewayError::Config("at least one provider is required".into()));
        }
        let mut names: Vec<&str> = self.providers.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(GatewayError::Config(format!("provider `{}` listed twice", w[0])));
        }
        if let Some(d) = &self.default_provider {
            if !names.contains(&d.as_str()) {
                return Err(GatewayError::Config(format!("default_provider `{d}` is not configured")));
            }
        }
        for p in &self.providers {
            if p.kind == ProviderKind::Http && p.format.is_none() {
                return Err(GatewayError::Config(format!("http provider `{}` needs a format", p.name)));
            }
            if p.kind == ProviderKind::Http && p.model.is_none() {
                return Err(GatewayError::Config(format!("http provider `{}` needs a model", p.name)));
            }
        }
        Ok(())
    }

    pub fn default_provider(&self) -> &str {
        self.default_provider
            .as_deref()
            .unwrap_or(self.providers[0].name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = GatewayConfig::from_toml("model_path = \"m.bin\"\n").unwrap();
        assert_eq!(cfg.concurrency_limit, 256);
        assert_eq!(cfg.providers.len(), 3);
        assert_eq!(cfg.default_provider(), "gemini");
        assert_eq!(cfg.router.confidence_threshold, 0.3);
        assert_eq!(cfg.embedding.backend, EmbeddingBackend::Local);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(GatewayConfig::from_toml("").is_err());
        assert!(GatewayConfig::from_toml("model_path = \"m\"\nbogus = 1\n").is_err());
        assert!(GatewayConfig::from_toml("model_path = \"m\"\nconcurrency_limit = 0\n").is_err());
        assert!(GatewayConfig::from_toml("model_path = \"m\"\ndefault_provider = \"x\"\n").is_err());
        let http = "model_path = \"m\"\n[[providers]]\nname = \"live\"\nkind = \"http\"\n";
        assert!(GatewayConfig::from_toml(http).is_err());
    }

    #[test]
    fn shipped_example_parses() {
        let cfg = GatewayConfig::from_toml(include_str!("../examples/gateway.toml")).unwrap();
        assert_eq!(cfg.providers.len(), 3);
        assert_eq!(cfg.ledger_path, Some(PathBuf::from("ledger.jsonl")));
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gw.toml");
        std::fs::write(&path, "model_path = \"m.bin\"\nledger_path = \"/abs/l.jsonl\"\n").unwrap();
        let cfg = GatewayConfig::load(&path).unwrap();
        assert_eq!(cfg.model_path, dir.path().join("m.bin"));
        assert_eq!(cfg.ledger_path.unwrap(), PathBuf::from("/abs/l.jsonl"));
    }
}
