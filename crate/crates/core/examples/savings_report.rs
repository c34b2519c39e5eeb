//! Builds a savings report from a usage ledger and exports it.

use template_router::accounting::{export_report, read_ledger, ReportFormat, UsageLedger, UsageRecord};
use template_router::domain::{preset, TemplateId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("ledger.jsonl");
    let pricing = preset("anthropic", "claude-3-haiku").ok_or("missing preset")?;
    let ledger = UsageLedger::open(&path)?;
    for (i, (t, out)) in [(TemplateId::Minimal, 41), (TemplateId::Standard, 170), (TemplateId::Verbose, 460)]
        .into_iter()
        .enumerate()
    {
        ledger.append(UsageRecord::priced(format!("q{i}"), t, false, 30, out, 455, true, &pricing))?;
    }
    ledger.append(UsageRecord::failed("q3", "anthropic", TemplateId::Technical))?;

    let report = ledger.report()?;
    let t = &report.totals;
    println!(
        "{} calls ({} failed): baseline {} actual {} saved {} ({}%), ${:.6} saved",
        t.queries,
        t.failed,
        t.baseline_tokens,
        t.actual_tokens,
        t.saved_tokens,
        t.percent_display(),
        t.saved_cost_usd
    );
    assert_eq!(read_ledger(&path)?, ledger.snapshot());
    let csv = dir.path().join("savings.csv");
    export_report(&report, ReportFormat::Csv, &csv)?;
    print!("{}", std::fs::read_to_string(&csv)?);
    Ok(())
}
