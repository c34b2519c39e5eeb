//! Shared domain types: queries, template identifiers, probability vectors
//! and cost parameters.

mod cost;
mod pricing;

pub use cost::{
    expected_cost, pac_bound, projected_total_cost, select_cost_aware, CostAwareChoice,
    CostParams, DEFAULT_ROUTING_COST_USD,
};
pub use pricing::{
    load_pricing_table, preset, PricingTable, ProviderPricing, PRICING_PRESETS,
    PRICING_TABLE_VERSION,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance used when validating that a probability vector sums to one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Errors raised by the cost math and domain validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("template index {index} out of range for {len} templates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("probability vector is invalid: {0}")]
    InvalidProbabilities(String),
    #[error("cost parameters are invalid: {0}")]
    InvalidCosts(String),
    #[error("query is invalid: {0}")]
    InvalidQuery(String),
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("pricing table error: {0}")]
    Pricing(String),
}

/// An incoming request to be routed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<BTreeMap<String, String>>,
}

impl Query {
    /// Builds a query, rejecting text that is empty after trimming.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DomainError> {
        let query = Self {
            id: id.into(),
            text: text.into(),
            metadata: None,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.text.trim().is_empty() {
            return Err(DomainError::InvalidQuery(format!(
                "query `{}` has empty text",
                self.id
            )));
        }
        Ok(())
    }
}

/// Response template identifier.
///
/// The five known templates are ordered by hard token cap:
/// `Minimal < Executive < Standard < Technical < Verbose`. Any other name is
/// carried through as [`TemplateId::Unknown`] and sorts after the known set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateId {
    Minimal,
    Executive,
    Standard,
    Technical,
    Verbose,
    Unknown(String),
}

impl TemplateId {
    /// Number of known templates.
    pub const K: usize = 5;

    /// Known templates in canonical (cheapest first) order.
    pub const CANONICAL: [TemplateId; 5] = [
        TemplateId::Minimal,
        TemplateId::Executive,
        TemplateId::Standard,
        TemplateId::Technical,
        TemplateId::Verbose,
    ];

    /// Position in [`TemplateId::CANONICAL`], `None` for unknown templates.
    pub fn canonical_index(&self) -> Option<usize> {
        match self {
            TemplateId::Minimal => Some(0),
            TemplateId::Executive => Some(1),
            TemplateId::Standard => Some(2),
            TemplateId::Technical => Some(3),
            TemplateId::Verbose => Some(4),
            TemplateId::Unknown(_) => None,
        }
    }

    pub fn from_canonical_index(index: usize) -> Option<TemplateId> {
        Self::CANONICAL.get(index).cloned()
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, TemplateId::Unknown(_))
    }

    pub fn as_str(&self) -> &str {
        match self {
            TemplateId::Minimal => "minimal",
            TemplateId::Executive => "executive",
            TemplateId::Standard => "standard",
            TemplateId::Technical => "technical",
            TemplateId::Verbose => "verbose",
            TemplateId::Unknown(name) => name,
        }
    }

    /// Parses a known template name, returning `None` for anything else.
    pub fn parse_known(name: &str) -> Option<TemplateId> {
        match name.trim().to_ascii_lowercase().as_str() {
            "minimal" => Some(TemplateId::Minimal),
            "executive" => Some(TemplateId::Executive),
            "standard" => Some(TemplateId::Standard),
            "technical" => Some(TemplateId::Technical),
            "verbose" => Some(TemplateId::Verbose),
            _ => None,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::parse_known(s).unwrap_or_else(|| TemplateId::Unknown(s.trim().to_string())))
    }
}

impl PartialOrd for TemplateId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TemplateId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self.canonical_index(), other.canonical_index()) {
            (Some(a), Some(b)) => a.cmp(&b),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => self.as_str().cmp(other.as_str()),
        }
    }
}

impl Serialize for TemplateId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TemplateId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Ok(name.parse().expect("infallible"))
    }
}

/// Probability vector over templates in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates entries in `[0, 1]` summing to one within [`PROB_SUM_TOLERANCE`].
    pub fn new(values: Vec<f64>) -> Result<Self, DomainError> {
        if values.is_empty() {
            return Err(DomainError::InvalidProbabilities("empty vector".into()));
        }
        if let Some((i, p)) = values
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(DomainError::InvalidProbabilities(format!(
                "entry {i} = {p} outside [0, 1]"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(DomainError::InvalidProbabilities(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self(values))
    }

    /// Uniform distribution over `k` entries.
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.0.get(index).copied()
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }

    /// Probability assigned to a known template (canonical vectors only).
    pub fn prob_of(&self, template: &TemplateId) -> Option<f64> {
        template.canonical_index().and_then(|i| self.get(i))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        ProbVector::new(values).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_follows_caps() {
        let mut ids = vec![
            TemplateId::Verbose,
            TemplateId::Unknown("zzz".into()),
            TemplateId::Standard,
            TemplateId::Minimal,
            TemplateId::Technical,
            TemplateId::Executive,
        ];
        ids.sort();
        assert_eq!(&ids[..5], &TemplateId::CANONICAL);
        assert_eq!(ids[5], TemplateId::Unknown("zzz".into()));
    }

    #[test]
    fn template_names_round_trip() {
        for id in TemplateId::CANONICAL {
            let parsed: TemplateId = id.as_str().parse().unwrap();
            assert_eq!(parsed, id);
        }
        let unknown: TemplateId = "experimental".parse().unwrap();
        assert_eq!(unknown, TemplateId::Unknown("experimental".into()));
        let json = serde_json::to_string(&TemplateId::Executive).unwrap();
        assert_eq!(json, "\"executive\"");
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.2; 5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.5 + 2e-9]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        assert!(serde_json::from_str::<ProbVector>("[0.3, 0.3]").is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let p = ProbVector::new(vec![0.1, 0.4, 0.4, 0.1]).unwrap();
        assert_eq!(p.argmax(), 1);
        assert_eq!(p.max(), 0.4);
    }

    #[test]
    fn blank_query_rejected() {
        assert!(Query::new("q1", "   \n").is_err());
        assert!(Query::new("q1", "What is 2+2?").is_ok());
    }
}
