use serde::{Deserialize, Serialize};

use super::{DomainError, ProbVector, TemplateId};

/// Embedding-API routing cost per query (USD), about $0.40 per million queries.
pub const DEFAULT_ROUTING_COST_USD: f64 = 0.40 / 1_000_000.0;

/// Per-template generation costs plus the fallback and routing costs, all USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// `c(t_i)` indexed like the probability vector (canonical order).
    pub per_template_cost: Vec<f64>,
    /// Cost charged when the chosen template turns out to be wrong.
    pub fallback_cost: f64,
    /// Per-query routing overhead.
    pub routing_cost: f64,
}

impl CostParams {
    pub fn new(
        per_template_cost: Vec<f64>,
        fallback_cost: f64,
        routing_cost: f64,
    ) -> Result<Self, DomainError> {
        let params = Self {
            per_template_cost,
            fallback_cost,
            routing_cost,
        };
        params.validate()?;
        Ok(params)
    }

    /// Derives `c(t) = alpha * tau(t)` with `alpha = output_usd_per_mtok / 1e6`.
    ///
    /// `mean_tokens` is indexed in canonical template order. The fallback cost
    /// defaults to the verbose template's cost (the last canonical entry).
    pub fn from_output_price(
        output_usd_per_mtok: f64,
        mean_tokens: &[f64],
        routing_cost: f64,
    ) -> Result<Self, DomainError> {
        let alpha = output_usd_per_mtok / 1_000_000.0;
        let per_template_cost: Vec<f64> = mean_tokens.iter().map(|tau| alpha * tau).collect();
        let verbose = TemplateId::Verbose.canonical_index().expect("known");
        let fallback_cost = per_template_cost
            .get(verbose)
            .or(per_template_cost.last())
            .copied()
            .unwrap_or(0.0);
        Self::new(per_template_cost, fallback_cost, routing_cost)
    }

    pub fn with_fallback_cost(mut self, fallback_cost: f64) -> Result<Self, DomainError> {
        self.fallback_cost = fallback_cost;
        self.validate()?;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.per_template_cost.len()
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.per_template_cost.is_empty() {
            return Err(DomainError::InvalidCosts("no template costs".into()));
        }
        let all = self
            .per_template_cost
            .iter()
            .chain([&self.fallback_cost, &self.routing_cost]);
        for c in all {
            if !c.is_finite() || *c < 0.0 {
                return Err(DomainError::InvalidCosts(format!(
                    "cost {c} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

/// Expected cost of committing to template `index`:
/// `c(t_i) * P[i] + c_fallback * (1 - P[i])`.
pub fn expected_cost(
    index: usize,
    params: &CostParams,
    probs: &ProbVector,
) -> Result<f64, DomainError> {
    check_shapes(params, probs)?;
    let p = probs.get(index).ok_or(DomainError::IndexOutOfRange {
        index,
        len: probs.len(),
    })?;
    Ok(params.per_template_cost[index] * p + params.fallback_cost * (1.0 - p))
}

/// Outcome of cost-aware selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostAwareChoice {
    pub index: usize,
    pub expected_cost: f64,
}

impl CostAwareChoice {
    /// Template for canonical five-way vectors; `None` for other layouts.
    pub fn template(&self) -> Option<TemplateId> {
        TemplateId::from_canonical_index(self.index)
    }
}

/// Picks the template with minimum expected cost. Ties go to the lowest index,
/// which in canonical order is the cheapest template.
pub fn select_cost_aware(
    params: &CostParams,
    probs: &ProbVector,
) -> Result<CostAwareChoice, DomainError> {
    check_shapes(params, probs)?;
    let mut best = CostAwareChoice {
        index: TemplateId::Verbose
            .canonical_index()
            .filter(|i| *i < probs.len())
            .unwrap_or(probs.len() - 1),
        expected_cost: f64::INFINITY,
    };
    for (index, (&c, &p)) in params
        .per_template_cost
        .iter()
        .zip(probs.as_slice())
        .enumerate()
    {
        let e = c * p + params.fallback_cost * (1.0 - p);
        if e < best.expected_cost {
            best = CostAwareChoice {
                index,
                expected_cost: e,
            };
        }
    }
    Ok(best)
}

fn check_shapes(params: &CostParams, probs: &ProbVector) -> Result<(), DomainError> {
    if params.k() != probs.len() {
        return Err(DomainError::InvalidCosts(format!(
            "{} template costs for a {}-entry probability vector",
            params.k(),
            probs.len()
        )));
    }
    Ok(())
}

/// PAC generalization bound:
/// `L + sqrt((d_vc * ln(2n / d_vc) + ln(4 / delta)) / (2n))`.
pub fn pac_bound(empirical_loss: f64, n: u64, d_vc: f64, delta: f64) -> Result<f64, DomainError> {
    if n == 0 {
        return Err(DomainError::Domain("n must be positive".into()));
    }
    if !(d_vc > 0.0 && d_vc.is_finite()) {
        return Err(DomainError::Domain(format!("d_vc = {d_vc} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DomainError::Domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !empirical_loss.is_finite() {
        return Err(DomainError::Domain("empirical loss must be finite".into()));
    }
    let n = n as f64;
    let ratio = 2.0 * n / d_vc;
    if ratio <= 1.0 {
        return Err(DomainError::Domain(format!(
            "2n / d_vc = {ratio} must exceed 1"
        )));
    }
    let radical = (d_vc * ratio.ln() + (4.0 / delta).ln()) / (2.0 * n);
    Ok(empirical_loss + radical.sqrt())
}

/// Routing plus generation cost for `n_queries`.
pub fn projected_total_cost(
    n_queries: u64,
    params: &CostParams,
    per_query_generation_cost: f64,
) -> f64 {
    let n = n_queries as f64;
    n * params.routing_cost + n * per_query_generation_cost
}
