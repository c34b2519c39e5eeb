use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AccountingError, UsageRecord};
use crate::domain::TemplateId;

/// Provider name used for the aggregate row.
pub const TOTAL_ROW: &str = "TOTAL";

/// Savings of one provider (or the total row) against the verbose baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSavings {
    pub provider: String,
    pub queries: u64,
    pub failed: u64,
    pub degraded: u64,
    pub fallbacks: u64,
    pub baseline_tokens: u64,
    pub actual_tokens: u64,
    pub saved_tokens: i64,
    /// `100 * saved / baseline`, unrounded. 100 when nothing was generated.
    pub percent_saved: f64,
    pub baseline_cost_usd: f64,
    pub actual_cost_usd: f64,
    pub saved_cost_usd: f64,
    /// Baseline is zero while output is not; the percentage is meaningless.
    pub invalid: bool,
}

impl ProviderSavings {
    /// Builds a row from token totals, deriving saved and percent.
    pub fn from_totals(provider: impl Into<String>, baseline_tokens: u64, actual_tokens: u64) -> Self {
        let mut row = Self {
            provider: provider.into(),
            queries: 0,
            failed: 0,
            degraded: 0,
            fallbacks: 0,
            baseline_tokens,
            actual_tokens,
            saved_tokens: 0,
            percent_saved: 0.0,
            baseline_cost_usd: 0.0,
            actual_cost_usd: 0.0,
            saved_cost_usd: 0.0,
            invalid: false,
        };
        row.derive();
        row
    }

    fn add(&mut self, r: &UsageRecord, include_degraded: bool) {
        self.queries += 1;
        self.failed += u64::from(!r.success);
        self.degraded += u64::from(r.degraded);
        self.fallbacks += u64::from(r.fallback);
        if r.degraded && !include_degraded {
            return;
        }
        self.baseline_tokens += r.baseline_output_tokens;
        self.actual_tokens += r.output_tokens;
        self.baseline_cost_usd += r.baseline_cost_usd;
        self.actual_cost_usd += r.cost_usd;
    }

    fn derive(&mut self) {
        self.saved_tokens = self.baseline_tokens as i64 - self.actual_tokens as i64;
        self.saved_cost_usd = self.baseline_cost_usd - self.actual_cost_usd;
        self.invalid = self.baseline_tokens == 0 && self.actual_tokens > 0;
        self.percent_saved = if self.actual_tokens == 0 && self.baseline_tokens > 0 {
            100.0
        } else if self.baseline_tokens == 0 {
            0.0
        } else {
            100.0 * self.saved_tokens as f64 / self.baseline_tokens as f64
        };
    }

    /// Percentage rounded to 0.1 point, e.g. `"33.0"`.
    pub fn percent_display(&self) -> String {
        format!("{:.1}", self.percent_saved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateCount {
    pub template: TemplateId,
    pub count: u64,
    pub percent: f64,
}

/// Counts of routed templates in canonical order (unknown templates last).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TemplateHistogram {
    pub n: u64,
    pub templates: Vec<TemplateCount>,
}

impl TemplateHistogram {
    pub fn from_templates<'a>(templates: impl IntoIterator<Item = &'a TemplateId>) -> Self {
        let mut counts: BTreeMap<TemplateId, u64> = BTreeMap::new();
        let mut n = 0;
        for t in templates {
            *counts.entry(t.clone()).or_default() += 1;
            n += 1;
        }
        let templates = counts
            .into_iter()
            .map(|(template, count)| TemplateCount {
                template,
                count,
                percent: 100.0 * count as f64 / n as f64,
            })
            .collect();
        Self { n, templates }
    }

    pub fn count(&self, template: &TemplateId) -> u64 {
        self.templates
            .iter()
            .find(|t| &t.template == template)
            .map_or(0, |t| t.count)
    }

    pub fn percent(&self, template: &TemplateId) -> f64 {
        self.templates
            .iter()
            .find(|t| &t.template == template)
            .map_or(0.0, |t| t.percent)
    }
}

pub fn template_distribution(records: &[UsageRecord]) -> TemplateHistogram {
    TemplateHistogram::from_templates(records.iter().map(|r| &r.template))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    /// One row per provider, sorted by name.
    pub providers: Vec<ProviderSavings>,
    pub totals: ProviderSavings,
    pub template_distribution: TemplateHistogram,
}

impl SavingsReport {
    pub fn provider(&self, name: &str) -> Option<&ProviderSavings> {
        self.providers.iter().find(|p| p.provider == name)
    }
}

/// Sums records per provider.
///
/// Degraded calls (routed without a classifier decision) are counted but kept
/// out of token and cost sums; failed calls carry zero tokens.
pub fn savings_vs_baseline(records: &[UsageRecord]) -> Result<SavingsReport, AccountingError> {
    savings_vs_baseline_with(records, false)
}

/// Like [`savings_vs_baseline`], optionally folding degraded calls into the sums.
pub fn savings_vs_baseline_with(records: &[UsageRecord], include_degraded: bool) -> Result<SavingsReport, AccountingError> {
    let mut per: BTreeMap<&str, ProviderSavings> = BTreeMap::new();
    let mut totals = ProviderSavings::from_totals(TOTAL_ROW, 0, 0);
    for r in records {
        r.validate()?;
        per.entry(r.provider.as_str())
            .or_insert_with(|| ProviderSavings::from_totals(r.provider.clone(), 0, 0))
            .add(r, include_degraded);
        totals.add(r, include_degraded);
    }
    let mut providers: Vec<ProviderSavings> = per.into_values().collect();
    providers.iter_mut().for_each(ProviderSavings::derive);
    totals.derive();
    Ok(SavingsReport {
        providers,
        totals,
        template_distribution: template_distribution(records),
    })
}

/// Routing accuracy over the five known templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// Row and column order of `confusion`.
    pub labels: Vec<TemplateId>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl AccuracyReport {
    /// Number of items whose true label is `labels[i]`.
    pub fn support(&self, i: usize) -> u64 {
        self.confusion[i].iter().sum()
    }
}

pub fn routing_accuracy(predictions: &[TemplateId], labels: &[TemplateId]) -> Result<AccuracyReport, AccountingError> {
    if predictions.len() != labels.len() {
        return Err(AccountingError::Input(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(AccountingError::Input("no predictions to score".into()));
    }
    let k = TemplateId::K;
    let mut confusion = vec![vec![0u64; k]; k];
    let index = |t: &TemplateId, what: &str, i: usize| {
        t.canonical_index()
            .ok_or_else(|| AccountingError::Input(format!("{what} {i} is unknown template `{t}`")))
    };
    for (i, (p, l)) in predictions.iter().zip(labels).enumerate() {
        confusion[index(l, "label", i)?][index(p, "prediction", i)?] += 1;
    }
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let n = predictions.len() as u64;
    Ok(AccuracyReport {
        n,
        correct,
        accuracy: correct as f64 / n as f64,
        labels: TemplateId::CANONICAL.to_vec(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_savings_fixtures() {
        let openai = ProviderSavings::from_totals("openai", 498_425, 333_814);
        assert_eq!(openai.saved_tokens, 164_611);
        assert_eq!(openai.percent_display(), "33.0");
        let claude = ProviderSavings::from_totals("anthropic", 454_975, 306_634);
        assert_eq!(claude.saved_tokens, 148_341);
        assert_eq!(claude.percent_display(), "32.6");
    }

    #[test]
    fn edge_cases() {
        let zero = ProviderSavings::from_totals("x", 100, 0);
        assert_eq!(zero.percent_saved, 100.0);
        let bad = ProviderSavings::from_totals("x", 0, 10);
        assert!(bad.invalid);
        let empty = ProviderSavings::from_totals("x", 0, 0);
        assert!(!empty.invalid);
    }

    #[test]
    fn degraded_calls_are_counted_not_summed() {
        let p = crate::domain::preset("openai", "gpt-4o-mini").unwrap();
        let routed = UsageRecord::priced("a", TemplateId::Minimal, false, 10, 40, 480, false, &p);
        let degraded = UsageRecord::priced("b", TemplateId::Verbose, false, 10, 470, 470, true, &p).with_degraded(true);
        let records = [routed, degraded];
        let r = savings_vs_baseline(&records).unwrap();
        assert_eq!((r.totals.queries, r.totals.degraded), (2, 1));
        assert_eq!((r.totals.baseline_tokens, r.totals.actual_tokens), (480, 40));
        assert_eq!(r.template_distribution.n, 2);
        let all = savings_vs_baseline_with(&records, true).unwrap();
        assert_eq!((all.totals.baseline_tokens, all.totals.actual_tokens), (950, 510));
    }

    #[test]
    fn accuracy_fixture() {
        let labels = vec![TemplateId::Verbose; 1000];
        let mut preds = labels.clone();
        preds.iter_mut().skip(905).for_each(|p| *p = TemplateId::Minimal);
        let r = routing_accuracy(&preds, &labels).unwrap();
        assert_eq!(r.correct, 905);
        assert_eq!(r.accuracy, 0.905);
        assert_eq!(r.support(4), 1000);
    }

    #[test]
    fn accuracy_input_errors() {
        assert!(routing_accuracy(&[TemplateId::Minimal], &[]).is_err());
        assert!(routing_accuracy(&[], &[]).is_err());
        assert!(routing_accuracy(&[TemplateId::Unknown("x".into())], &[TemplateId::Minimal]).is_err());
    }

    #[test]
    fn empty_histogram() {
        let h = template_distribution(&[]);
        assert_eq!(h.n, 0);
        assert!(h.templates.is_empty());
    }
}
