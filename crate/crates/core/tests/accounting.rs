use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use template_router::accounting::{
    cost_of_tokens, export_report, import_report, read_ledger, routing_accuracy, savings_vs_baseline,
    savings_vs_baseline_with, template_distribution, ProviderSavings, ReportFormat, SavingsReport, TokenKind,
    UsageLedger, UsageRecord,
};
use template_router::domain::{preset, ProviderPricing, TemplateId};

fn pricing(provider: &str) -> ProviderPricing {
    ProviderPricing {
        provider: provider.into(),
        model: "m".into(),
        input_usd_per_mtok: 0.15,
        output_usd_per_mtok: 0.60,
    }
}

fn random_records(rng: &mut impl Rng, n: usize) -> Vec<UsageRecord> {
    let providers = ["gemini", "openai", "anthropic"];
    (0..n)
        .map(|i| {
            let t = TemplateId::CANONICAL[rng.random_range(0..5)].clone();
            let p = pricing(providers[i % 3]);
            if rng.random_ratio(1, 20) {
                return UsageRecord::failed(format!("q{i}"), &p.provider, t);
            }
            let baseline = rng.random_range(1..=500u64);
            let actual = rng.random_range(1..=baseline);
            UsageRecord::priced(format!("q{i}"), t, rng.random_ratio(1, 10), rng.random_range(5..80), actual, baseline, false, &p)
                .with_degraded(rng.random_ratio(1, 25))
        })
        .collect()
}

#[test]
fn published_savings_fixtures() {
    let cases = [
        (498_425u64, 333_814u64, 164_611i64, "33.0"),
        (454_975, 306_634, 148_341, "32.6"),
    ];
    for (baseline, actual, saved, pct) in cases {
        let row = ProviderSavings::from_totals("p", baseline, actual);
        assert_eq!(row.saved_tokens, saved);
        assert_eq!(row.percent_display(), pct);
    }
    let gemini = ProviderSavings::from_totals("gemini", 495_676, 327_910);
    assert_eq!(gemini.saved_tokens, 167_766);
    // 33.846%: rounds to 33.8, not the 33.9 printed alongside these figures.
    assert_eq!(gemini.percent_display(), "33.8");
}

#[test]
fn case_study_reduction() {
    let row = ProviderSavings::from_totals("case", 287, 43);
    assert!((row.percent_saved - 85.0).abs() <= 0.05, "{}", row.percent_saved);
    assert_eq!(row.percent_display(), "85.0");
}

#[test]
fn cost_fixtures() {
    let p = ProviderPricing {
        provider: "x".into(),
        model: "y".into(),
        input_usd_per_mtok: 2.5,
        output_usd_per_mtok: 10.0,
    };
    assert_eq!(cost_of_tokens(450, &p, TokenKind::Output), 0.0045);
    assert_eq!(cost_of_tokens(0, &p, TokenKind::Output), 0.0);
    let mini = preset("openai", "gpt-4o-mini").unwrap();
    assert!((cost_of_tokens(1_000_000, &mini, TokenKind::Output) - 0.60).abs() < 1e-15);
}

#[test]
fn accuracy_fixture_and_confusion() {
    let labels: Vec<TemplateId> = (0..1000).map(|i| TemplateId::CANONICAL[i % 5].clone()).collect();
    let mut preds = labels.clone();
    for p in preds.iter_mut().take(95) {
        *p = if *p == TemplateId::Verbose { TemplateId::Minimal } else { TemplateId::Verbose };
    }
    let r = routing_accuracy(&preds, &labels).unwrap();
    assert_eq!(r.correct, 905);
    assert_eq!(r.accuracy, 0.905);
    for i in 0..5 {
        assert_eq!(r.confusion[i].iter().sum::<u64>(), r.support(i));
        assert_eq!(r.support(i), 200);
    }
}

#[test]
fn random_predictions_score_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<TemplateId> = (0..10_000).map(|i| TemplateId::CANONICAL[i % 5].clone()).collect();
    let preds: Vec<TemplateId> = (0..10_000).map(|_| TemplateId::CANONICAL[rng.random_range(0..5)].clone()).collect();
    let acc = routing_accuracy(&preds, &labels).unwrap().accuracy;
    assert!((acc - 0.20).abs() <= 0.02, "{acc}");
}

#[test]
fn reference_distribution_percentages() {
    let counts = [74usize, 104, 285, 19, 518];
    let templates: Vec<TemplateId> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(TemplateId::CANONICAL[c].clone(), n))
        .collect();
    let records: Vec<UsageRecord> = templates
        .iter()
        .enumerate()
        .map(|(i, t)| UsageRecord::priced(format!("q{i}"), t.clone(), false, 10, 10, 20, false, &pricing("p")))
        .collect();
    let h = template_distribution(&records);
    assert_eq!(h.n, 1000);
    let expected = [7.4, 10.4, 28.5, 1.9, 51.8];
    for (t, pct) in TemplateId::CANONICAL.iter().zip(expected) {
        assert_eq!(h.percent(t), pct);
    }
    assert!(template_distribution(&[]).templates.is_empty());
}

#[test]
fn json_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let report = savings_vs_baseline(&random_records(&mut rng, 600)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    export_report(&report, ReportFormat::Json, &path).unwrap();
    assert_eq!(ReportFormat::from_path(&path), ReportFormat::Json);
    assert_eq!(import_report(&path, ReportFormat::Json).unwrap(), report);
}

#[test]
fn csv_has_provider_rows_plus_total_to_six_decimals() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let report = savings_vs_baseline(&random_records(&mut rng, 600)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    export_report(&report, ReportFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + report.providers.len() + 1);
    assert!(text.lines().last().unwrap().starts_with("TOTAL,"));

    let back: SavingsReport = import_report(&path, ReportFormat::Csv).unwrap();
    let rows = back.providers.iter().chain(std::iter::once(&back.totals));
    for (a, b) in report.providers.iter().chain(std::iter::once(&report.totals)).zip(rows) {
        assert_eq!(a.provider, b.provider);
        assert_eq!((a.baseline_tokens, a.actual_tokens, a.saved_tokens), (b.baseline_tokens, b.actual_tokens, b.saved_tokens));
        assert_eq!((a.queries, a.failed, a.degraded, a.fallbacks, a.invalid), (b.queries, b.failed, b.degraded, b.fallbacks, b.invalid));
        for (x, y) in [
            (a.percent_saved, b.percent_saved),
            (a.baseline_cost_usd, b.baseline_cost_usd),
            (a.actual_cost_usd, b.actual_cost_usd),
            (a.saved_cost_usd, b.saved_cost_usd),
        ] {
            assert!((x - y).abs() <= 5e-7, "{x} vs {y}");
        }
    }
}

#[test]
fn ledger_persists_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let records = random_records(&mut rng, 40);
    {
        let ledger = UsageLedger::open(&path).unwrap();
        for r in &records[..25] {
            ledger.append(r.clone()).unwrap();
        }
    }
    let ledger = UsageLedger::open(&path).unwrap();
    assert_eq!(ledger.len(), 25);
    for r in &records[25..] {
        ledger.append(r.clone()).unwrap();
    }
    let replayed = read_ledger(&path).unwrap();
    assert_eq!(replayed, records);
    assert_eq!(ledger.report().unwrap(), savings_vs_baseline(&replayed).unwrap());
}

#[test]
fn corrupt_ledger_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let rec = UsageRecord::priced("q", TemplateId::Minimal, false, 1, 2, 3, false, &pricing("p"));
    let line = serde_json::to_string(&rec).unwrap();
    std::fs::write(&path, format!("{line}\n{{broken\n")).unwrap();
    let err = read_ledger(&path).unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");
}

#[test]
fn degraded_records_can_be_included_on_request() {
    let p = pricing("p");
    let records = vec![
        UsageRecord::priced("a", TemplateId::Minimal, false, 1, 40, 500, false, &p),
        UsageRecord::priced("b", TemplateId::Verbose, false, 1, 480, 500, true, &p).with_degraded(true),
    ];
    let default = savings_vs_baseline(&records).unwrap();
    assert_eq!((default.totals.queries, default.totals.degraded), (2, 1));
    assert_eq!(default.totals.baseline_tokens, 500);
    let all = savings_vs_baseline_with(&records, true).unwrap();
    assert_eq!(all.totals.baseline_tokens, 1000);
    assert_eq!(all.template_distribution.n, 2);
}

proptest! {
    #[test]
    fn conservation_and_identity(seed in any::<u64>(), n in 0usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = random_records(&mut rng, n);
        let report = savings_vs_baseline(&records).unwrap();
        prop_assert_eq!(report.template_distribution.n as usize, n);
        prop_assert_eq!(report.template_distribution.templates.iter().map(|t| t.count).sum::<u64>() as usize, n);
        if n > 0 {
            let pct: f64 = report.template_distribution.templates.iter().map(|t| t.percent).sum();
            prop_assert!((pct - 100.0).abs() <= 0.1);
        }
        for row in report.providers.iter().chain(std::iter::once(&report.totals)) {
            prop_assert_eq!(row.saved_tokens + row.actual_tokens as i64, row.baseline_tokens as i64);
        }
        prop_assert_eq!(report.providers.iter().map(|p| p.queries).sum::<u64>(), n as u64);
    }

    #[test]
    fn cost_is_linear(a in 0u64..10_000_000, b in 0u64..10_000_000, price in 0.0f64..100.0) {
        let p = ProviderPricing { provider: "x".into(), model: "y".into(), input_usd_per_mtok: price, output_usd_per_mtok: price };
        for kind in [TokenKind::Input, TokenKind::Output] {
            let whole = cost_of_tokens(a + b, &p, kind);
            let parts = cost_of_tokens(a, &p, kind) + cost_of_tokens(b, &p, kind);
            prop_assert!((whole - parts).abs() <= 1e-12);
        }
    }
}
