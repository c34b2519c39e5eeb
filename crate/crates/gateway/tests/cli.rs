use std::path::Path;
use std::process::{Command, Output};

use template_router::accounting::{import_report, ReportFormat, UsageLedger, UsageRecord};
use template_router::dataset::{write_dataset, DatasetFormat};
use template_router::domain::{preset, TemplateId};
use template_router::fixtures::SyntheticQueries;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_template-router"))
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cli(&[]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["train", "--out", "m.bin"]).status.code(), Some(2));
    let o = cli(&["report", "--ledger", "/nonexistent/ledger.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no such file"));
    assert_eq!(cli(&["serve", "--config", "/nonexistent/gateway.toml"]).status.code(), Some(2));
    let o = cli(&["evaluate", "--model", "/nonexistent/m.bin", "--data", "/nonexistent/d.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gateway.toml");
    std::fs::write(&cfg, "model_path = \"m.bin\"\nunknown_key = 1\n").unwrap();
    let o = cli(&["serve", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_on_clusters_then_route() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.bin");
    let report = dir.path().join("train.json");
    let o = cli(&[
        "train",
        "--synthetic-clusters",
        "100",
        "--max-epochs",
        "40",
        "--out",
        p(&model),
        "--report",
        p(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(model.is_file());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["train"], 350);
    assert_eq!(r["validation"], 50);
    assert_eq!(r["test"], 100);
    let acc = r["test_accuracy"]["accuracy"].as_f64().unwrap();
    assert!(acc >= 0.95, "held-out accuracy {acc}");

    let o = cli(&["route", "--model", p(&model), "--text", "What is 2+2?"]);
    assert!(o.status.success());
    let line: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(line["template"].is_string());
    let c = line["confidence"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&c));

    let o = cli(&["route", "--model", p(&model), "--text", "hi", "--threshold", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn text_pipeline_bench_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("queries.jsonl");
    write_dataset(&SyntheticQueries::balanced(20, 3).generate(), &data, DatasetFormat::Jsonl).unwrap();
    let model = dir.path().join("model.bin");
    let o = cli(&["train", "--data", p(&data), "--max-epochs", "20", "--out", p(&model)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = cli(&["evaluate", "--model", p(&model), "--data", p(&data), "--test-split"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("accuracy"));

    let out = dir.path().join("savings.json");
    let records = dir.path().join("records.jsonl");
    let o = cli(&[
        "bench",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--providers",
        "gemini,openai",
        "--out",
        p(&out),
        "--records",
        p(&records),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = import_report(&out, ReportFormat::Json).unwrap();
    assert_eq!(report.providers.len(), 2);
    assert_eq!(report.totals.queries, 200);

    let csv = dir.path().join("replayed.csv");
    let o = cli(&["report", "--ledger", p(&records), "--out", p(&csv)]);
    assert!(o.status.success());
    let replayed = import_report(&csv, ReportFormat::Csv).unwrap();
    assert_eq!(replayed.totals.saved_tokens, report.totals.saved_tokens);

    let o = cli(&["bench", "--model", p(&model), "--data", p(&data), "--providers", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_excludes_degraded_unless_asked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let pricing = preset("openai", "gpt-4o-mini").unwrap();
    {
        let ledger = UsageLedger::open(&path).unwrap();
        ledger
            .append(UsageRecord::priced("a", TemplateId::Minimal, false, 10, 40, 500, true, &pricing))
            .unwrap();
        ledger
            .append(
                UsageRecord::priced("b", TemplateId::Verbose, false, 10, 450, 500, true, &pricing).with_degraded(true),
            )
            .unwrap();
    }
    let out = dir.path().join("r.json");
    assert!(cli(&["report", "--ledger", p(&path), "--out", p(&out)]).status.success());
    let default = import_report(&out, ReportFormat::Json).unwrap();
    assert!(cli(&["report", "--ledger", p(&path), "--out", p(&out), "--include-degraded"]).status.success());
    let all = import_report(&out, ReportFormat::Json).unwrap();
    assert_eq!(default.totals.baseline_tokens, 500);
    assert_eq!(all.totals.baseline_tokens, 1000);
}
