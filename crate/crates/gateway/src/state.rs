//! Immutable per-generation service state, rebuilt on reload.

use std::collections::BTreeMap;
use std::sync::Arc;

use template_router::classifier::load_model;
use template_router::domain::{load_pricing_table, CostParams, PricingTable, ProviderPricing, TemplateId};
use template_router::embedding::{
    DisabledEmbedder, Embedder, EmbeddingCache, LocalHashEmbedder, OpenAiEmbedder,
};
use template_router::providers::{
    AuditLog, ChatBackend, HttpBackend, HttpBackendConfig, MockProvider, ProviderClient, ProviderProfile,
};
use template_router::router::{Router, RouterConfig, RouterMode};
use template_router::templates::TemplateRegistry;

use crate::config::{EmbeddingBackend, EmbeddingSection, GatewayConfig, ProviderKind, ProviderSection};
use crate::GatewayError;

/// A configured provider.
pub struct ProviderHandle {
    pub client: ProviderClient,
    pub pricing: ProviderPricing,
    /// Estimated verbose output, used as the baseline for live traffic.
    pub baseline_verbose_tokens: f64,
    pub timeout_ms: u64,
    pub retry_budget: u32,
}

/// Resources that live for the whole process and survive reloads.
pub struct Shared {
    pub embedder: Arc<dyn Embedder>,
    pub cache: Arc<EmbeddingCache>,
    pub audit: Option<Arc<AuditLog>>,
}

impl Shared {
    pub fn from_config(cfg: &GatewayConfig) -> Result<Self, GatewayError> {
        let cache = match &cfg.embedding.cache_path {
            Some(p) => EmbeddingCache::open(p)?,
            None => EmbeddingCache::in_memory(),
        };
        let audit = cfg
            .audit_path
            .as_ref()
            .map(|p| AuditLog::open(p).map(Arc::new))
            .transpose()?;
        Ok(Self {
            embedder: build_embedder(&cfg.embedding)?,
            cache: Arc::new(cache),
            audit,
        })
    }
}

pub fn build_embedder(section: &EmbeddingSection) -> Result<Arc<dyn Embedder>, GatewayError> {
    Ok(match section.backend {
        EmbeddingBackend::Local => Arc::new(LocalHashEmbedder),
        EmbeddingBackend::Disabled => Arc::new(DisabledEmbedder),
        EmbeddingBackend::Openai => Arc::new(OpenAiEmbedder::new(section.openai.clone())?),
    })
}

pub struct GatewayState {
    pub config: GatewayConfig,
    pub router: Router,
    pub registry: TemplateRegistry,
    pub providers: BTreeMap<String, ProviderHandle>,
    /// Costs under the default provider's prices; used by cost-aware requests.
    pub cost_params: CostParams,
    pub generation: u64,
}

impl GatewayState {
    /// Loads the model and builds routing and provider state. Fails if the
    /// model file cannot be loaded.
    pub fn build(config: GatewayConfig, shared: &Shared, generation: u64) -> Result<Self, GatewayError> {
        config.validate()?;
        let model = load_model(&config.model_path).map_err(|e| {
            GatewayError::Config(format!("cannot load model {}: {e}", config.model_path.display()))
        })?;
        let registry = match &config.templates_path {
            Some(p) => TemplateRegistry::from_toml(&std::fs::read_to_string(p)?)
                .map_err(|e| GatewayError::Config(e.to_string()))?,
            None => TemplateRegistry::default(),
        };
        let mut pricing = PricingTable::presets();
        if let Some(p) = &config.pricing_path {
            let overrides =
                load_pricing_table(&std::fs::read_to_string(p)?).map_err(|e| GatewayError::Config(e.to_string()))?;
            pricing
                .apply_overrides(overrides)
                .map_err(|e| GatewayError::Config(e.to_string()))?;
        }

        let mut providers = BTreeMap::new();
        for section in &config.providers {
            let handle = build_provider(section, &registry, &pricing, shared)?;
            providers.insert(section.name.clone(), handle);
        }
        let default = &providers[config.default_provider()];
        let cost_params = registry
            .cost_params(&default.pricing, config.router.routing_cost_usd)
            .map_err(|e| GatewayError::Config(e.to_string()))?;

        let router_config = RouterConfig {
            confidence_threshold: config.router.confidence_threshold,
            mode: config.router.mode,
            cost_params: (config.router.mode == RouterMode::CostAware).then(|| cost_params.clone()),
        };
        let router = Router::new(
            Arc::new(model),
            router_config,
            shared.embedder.clone(),
            shared.cache.clone(),
        )?;
        Ok(Self {
            config,
            router,
            registry,
            providers,
            cost_params,
            generation,
        })
    }

    pub fn provider(&self, name: Option<&str>) -> Option<(&str, &ProviderHandle)> {
        let name = name.unwrap_or(self.config.default_provider());
        self.providers.get_key_value(name).map(|(k, v)| (k.as_str(), v))
    }
}

fn build_provider(
    section: &ProviderSection,
    registry: &TemplateRegistry,
    pricing: &PricingTable,
    shared: &Shared,
) -> Result<ProviderHandle, GatewayError> {
    let (backend, model, baseline): (Arc<dyn ChatBackend>, String, f64) = match section.kind {
        ProviderKind::Mock => {
            let mut profile = match &section.custom_profile {
                Some(p) => p.clone(),
                None => {
                    let preset = section.profile.as_deref().unwrap_or(&section.name);
                    ProviderProfile::preset(preset)
                        .ok_or_else(|| GatewayError::Config(format!("unknown mock profile `{preset}`")))?
                }
            };
            if let Some(m) = &section.model {
                profile.model = m.clone();
            }
            profile.name = section.name.clone();
            let model = profile.model.clone();
            let baseline = profile.target_mean(&TemplateId::Verbose);
            (Arc::new(MockProvider::new(profile)?), model, baseline)
        }
        ProviderKind::Http => {
            let format = section.format.expect("validated");
            let cfg = HttpBackendConfig {
                name: section.name.clone(),
                format,
                base_url: section.base_url.clone(),
                api_key_env: section.api_key_env.clone(),
            };
            let baseline = registry
                .get(&TemplateId::Verbose)
                .map(|s| s.mean_tokens)
                .unwrap_or(500.0);
            (
                Arc::new(HttpBackend::from_env(cfg)?),
                section.model.clone().expect("validated"),
                baseline,
            )
        }
    };
    let key = section.pricing.as_deref().unwrap_or(&section.name);
    let mut row = pricing
        .get(key, &model)
        .or_else(|| pricing.for_provider(key))
        .cloned()
        .ok_or_else(|| GatewayError::Config(format!("no pricing for provider `{key}` model `{model}`")))?;
    row.provider = section.name.clone();
    row.model = model;

    let mut client = ProviderClient::new(backend);
    if let Some(audit) = &shared.audit {
        client = client.with_audit(audit.clone());
    }
    Ok(ProviderHandle {
        client,
        pricing: row,
        baseline_verbose_tokens: section.baseline_verbose_tokens.unwrap_or(baseline),
        timeout_ms: section.timeout_ms,
        retry_budget: section.retry_budget,
    })
}
