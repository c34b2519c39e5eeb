use serde::{Deserialize, Serialize};

use super::DomainError;

/// Version tag of the embedded pricing presets.
pub const PRICING_TABLE_VERSION: &str = "2025.1";

/// Per-million-token prices for one provider model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderPricing {
    pub provider: String,
    pub model: String,
    pub input_usd_per_mtok: f64,
    pub output_usd_per_mtok: f64,
}

impl ProviderPricing {
    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, v) in [
            ("input_usd_per_mtok", self.input_usd_per_mtok),
            ("output_usd_per_mtok", self.output_usd_per_mtok),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(DomainError::Pricing(format!(
                    "{}/{}: {name} = {v} must be nonnegative",
                    self.provider, self.model
                )));
            }
        }
        Ok(())
    }

    /// Output-to-input price ratio, `None` when input is free.
    pub fn output_multiplier(&self) -> Option<f64> {
        (self.input_usd_per_mtok > 0.0).then(|| self.output_usd_per_mtok / self.input_usd_per_mtok)
    }
}

struct PresetRow {
    provider: &'static str,
    model: &'static str,
    input: f64,
    output: f64,
}

/// Shipped 2025 list prices: a lower-cost and a higher-tier model per provider.
const PRESET_ROWS: [PresetRow; 6] = [
    PresetRow { provider: "openai", model: "gpt-4o-mini", input: 0.15, output: 0.60 },
    PresetRow { provider: "openai", model: "gpt-4o", input: 2.50, output: 10.00 },
    PresetRow { provider: "gemini", model: "gemini-2.0-flash-lite", input: 0.00, output: 0.00 },
    PresetRow { provider: "gemini", model: "gemini-2.5-pro", input: 1.25, output: 10.00 },
    PresetRow { provider: "anthropic", model: "claude-3-haiku", input: 0.25, output: 1.25 },
    PresetRow { provider: "anthropic", model: "claude-sonnet-4", input: 3.00, output: 15.00 },
];

/// Number of embedded presets.
pub const PRICING_PRESETS: usize = PRESET_ROWS.len();

/// Looks up an embedded preset by provider and model name.
pub fn preset(provider: &str, model: &str) -> Option<ProviderPricing> {
    PricingTable::presets().get(provider, model).cloned()
}

/// A pricing table: embedded presets optionally overridden from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    pub version: String,
    #[serde(rename = "pricing")]
    pub rows: Vec<ProviderPricing>,
}

impl PricingTable {
    pub fn presets() -> Self {
        Self {
            version: PRICING_TABLE_VERSION.to_string(),
            rows: PRESET_ROWS
                .iter()
                .map(|r| ProviderPricing {
                    provider: r.provider.to_string(),
                    model: r.model.to_string(),
                    input_usd_per_mtok: r.input,
                    output_usd_per_mtok: r.output,
                })
                .collect(),
        }
    }

    pub fn get(&self, provider: &str, model: &str) -> Option<&ProviderPricing> {
        self.rows
            .iter()
            .find(|r| r.provider == provider && r.model == model)
    }

    /// First row for a provider (the lower-cost tier for shipped presets).
    pub fn for_provider(&self, provider: &str) -> Option<&ProviderPricing> {
        self.rows.iter().find(|r| r.provider == provider)
    }

    /// Replaces rows with matching `(provider, model)` and appends new ones.
    pub fn apply_overrides(&mut self, overrides: PricingTable) -> Result<(), DomainError> {
        for row in overrides.rows {
            row.validate()?;
            match self
                .rows
                .iter_mut()
                .find(|r| r.provider == row.provider && r.model == row.model)
            {
                Some(existing) => *existing = row,
                None => self.rows.push(row),
            }
        }
        self.version = overrides.version;
        Ok(())
    }
}

/// Parses a TOML pricing file and layers it over the embedded presets.
///
/// ```toml
/// version = "2025.2"
///
/// [[pricing]]
/// provider = "openai"
/// model = "gpt-4o-mini"
/// input_usd_per_mtok = 0.15
/// output_usd_per_mtok = 0.60
/// ```
pub fn load_pricing_table(toml_text: &str) -> Result<PricingTable, DomainError> {
    #[derive(Deserialize)]
    struct File {
        version: Option<String>,
        #[serde(default)]
        pricing: Vec<ProviderPricing>,
    }
    let file: File =
        toml::from_str(toml_text).map_err(|e| DomainError::Pricing(e.to_string()))?;
    let mut table = PricingTable::presets();
    table.apply_overrides(PricingTable {
        version: file.version.unwrap_or_else(|| PRICING_TABLE_VERSION.to_string()),
        rows: file.pricing,
    })?;
    Ok(table)
}
