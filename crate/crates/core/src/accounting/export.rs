//! Report files.
//!
//! JSON holds the full [`SavingsReport`] at full precision. CSV holds one row
//! per provider followed by a `TOTAL` row, with these columns:
//!
//! ```text
//! provider,queries,failed,degraded,fallbacks,baseline_tokens,actual_tokens,
//! saved_tokens,percent_saved,baseline_cost_usd,actual_cost_usd,saved_cost_usd,invalid
//! ```
//!
//! Reals are written with 6 decimals. The template histogram is JSON-only.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AccountingError, ProviderSavings, SavingsReport, TemplateHistogram, TOTAL_ROW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// Guesses from the file extension; anything but `.csv` is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    provider: String,
    queries: u64,
    failed: u64,
    degraded: u64,
    fallbacks: u64,
    baseline_tokens: u64,
    actual_tokens: u64,
    saved_tokens: i64,
    percent_saved: String,
    baseline_cost_usd: String,
    actual_cost_usd: String,
    saved_cost_usd: String,
    invalid: bool,
}

impl From<&ProviderSavings> for CsvRow {
    fn from(p: &ProviderSavings) -> Self {
        Self {
            provider: p.provider.clone(),
            queries: p.queries,
            failed: p.failed,
            degraded: p.degraded,
            fallbacks: p.fallbacks,
            baseline_tokens: p.baseline_tokens,
            actual_tokens: p.actual_tokens,
            saved_tokens: p.saved_tokens,
            percent_saved: format!("{:.6}", p.percent_saved),
            baseline_cost_usd: format!("{:.6}", p.baseline_cost_usd),
            actual_cost_usd: format!("{:.6}", p.actual_cost_usd),
            saved_cost_usd: format!("{:.6}", p.saved_cost_usd),
            invalid: p.invalid,
        }
    }
}

impl CsvRow {
    fn into_savings(self) -> Result<ProviderSavings, AccountingError> {
        let real = |field: &str, v: &str| {
            v.parse::<f64>()
                .map_err(|e| AccountingError::Input(format!("{}: bad {field} `{v}`: {e}", self.provider)))
        };
        Ok(ProviderSavings {
            percent_saved: real("percent_saved", &self.percent_saved)?,
            baseline_cost_usd: real("baseline_cost_usd", &self.baseline_cost_usd)?,
            actual_cost_usd: real("actual_cost_usd", &self.actual_cost_usd)?,
            saved_cost_usd: real("saved_cost_usd", &self.saved_cost_usd)?,
            provider: self.provider,
            queries: self.queries,
            failed: self.failed,
            degraded: self.degraded,
            fallbacks: self.fallbacks,
            baseline_tokens: self.baseline_tokens,
            actual_tokens: self.actual_tokens,
            saved_tokens: self.saved_tokens,
            invalid: self.invalid,
        })
    }
}

pub fn export_report(report: &SavingsReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), AccountingError> {
    let file = File::create(path)?;
    match format {
        ReportFormat::Json => {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, report)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(file);
            for p in report.providers.iter().chain(std::iter::once(&report.totals)) {
                w.serialize(CsvRow::from(p))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Reads a report written by [`export_report`]. CSV imports carry an empty
/// template histogram.
pub fn import_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<SavingsReport, AccountingError> {
    let file = File::open(path)?;
    match format {
        ReportFormat::Json => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
        ReportFormat::Csv => {
            let mut providers = Vec::new();
            let mut totals = None;
            for row in csv::Reader::from_reader(file).deserialize::<CsvRow>() {
                let p = row?.into_savings()?;
                if p.provider == TOTAL_ROW {
                    totals = Some(p);
                } else {
                    providers.push(p);
                }
            }
            let totals = totals.ok_or_else(|| AccountingError::Input("CSV report has no TOTAL row".into()))?;
            Ok(SavingsReport {
                providers,
                totals,
                template_distribution: TemplateHistogram::default(),
            })
        }
    }
}
