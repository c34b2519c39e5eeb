//! `template-router` command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use template_router::accounting::{
    export_report, read_ledger, routing_accuracy, savings_vs_baseline_with, AccuracyReport, ReportFormat,
    SavingsReport, UsageLedger,
};
use template_router::bench::{embed_labeled, run_bench, BenchConfig, BenchProvider};
use template_router::classifier::{
    load_model, save_model, train_mlp_with_validation, LabeledData, MlpModel, TrainConfig, TrainReport,
};
use template_router::dataset::{
    load_dataset, stratified_split, stratified_split_indices, DatasetFormat, LabeledQuery, SplitSpec,
};
use template_router::domain::{Query, TemplateId};
use template_router::embedding::{Embedder, EmbeddingCache, OpenAiEmbedderConfig};
use template_router::fixtures::GaussianClusters;
use template_router::router::{RouterConfig, RouterMode};

use crate::config::{EmbeddingBackend, EmbeddingSection, GatewayConfig};
use crate::state::{build_embedder, GatewayState, Shared};
use crate::{Gateway, GatewayError};

#[derive(Debug, Parser)]
#[command(name = "template-router", version, about = "Route LLM queries to response templates")]
pub struct Cli {
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the classifier on a labeled dataset.
    Train(TrainArgs),
    /// Measure a trained model's accuracy on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Route one or more queries and print the decisions as JSON lines.
    Route(RouteArgs),
    /// Paired routed-vs-verbose benchmark against configured providers.
    Bench(BenchArgs),
    /// Run the HTTP gateway.
    Serve(ServeArgs),
    /// Summarize a usage ledger.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EmbeddingArgs {
    #[arg(long, value_enum, default_value = "local")]
    pub embedding: EmbeddingBackend,
    /// Persistent embedding cache file.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

impl EmbeddingArgs {
    fn section(&self) -> EmbeddingSection {
        EmbeddingSection {
            backend: self.embedding,
            cache_path: self.cache.clone(),
            openai: OpenAiEmbedderConfig::default(),
        }
    }

    fn open(&self) -> Result<(Arc<dyn Embedder>, Arc<EmbeddingCache>), CliError> {
        let cache = match &self.cache {
            Some(p) => EmbeddingCache::open(p).map_err(GatewayError::from)?,
            None => EmbeddingCache::in_memory(),
        };
        Ok((build_embedder(&self.section())?, Arc::new(cache)))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled dataset (.jsonl or .csv).
    #[arg(long, required_unless_present = "synthetic_clusters", conflicts_with = "synthetic_clusters")]
    pub data: Option<PathBuf>,
    /// Train on Gaussian clusters with this many samples per class instead of text.
    #[arg(long)]
    pub synthetic_clusters: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the training and test report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate only on the held-out test partition of the 70/10/20 split.
    #[arg(long)]
    pub test_split: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Argmax,
    CostAware,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    /// Gateway config; supplies model, embedding and cost settings.
    #[arg(long, required_unless_present = "model")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, required = true)]
    pub text: Vec<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Gateway config; supplies providers and pricing.
    #[arg(long, required_unless_present = "model")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated provider names; defaults to every configured provider.
    #[arg(long, value_delimiter = ',')]
    pub providers: Vec<String>,
    /// Savings report (.json or .csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-call usage records as JSON lines.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub concurrency: usize,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    /// Report file (.json or .csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Count calls routed without the classifier towards savings.
    #[arg(long)]
    pub include_degraded: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Gateway(GatewayError::Config(_)) => 2,
            _ => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn existing(path: &Path) -> Result<&Path, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => train(a).await,
        Command::Evaluate(a) => evaluate(a).await,
        Command::Route(a) => route(a).await,
        Command::Bench(a) => bench(a).await,
        Command::Serve(a) => serve(a).await,
        Command::Report(a) => report(a),
    }
}

fn load_items(path: &Path) -> Result<Vec<LabeledQuery>, CliError> {
    let loaded = load_dataset(existing(path)?, DatasetFormat::from_path(path)).map_err(runtime)?;
    for w in &loaded.warnings {
        tracing::warn!("{w}");
    }
    Ok(loaded.items)
}

fn predict(model: &MlpModel, data: &LabeledData) -> Result<Vec<TemplateId>, CliError> {
    data.features
        .rows()
        .into_iter()
        .map(|row| {
            let probs = model.predict_proba_raw(row.as_slice().expect("contiguous rows")).map_err(runtime)?;
            Ok(TemplateId::from_canonical_index(probs.argmax()).expect("canonical index"))
        })
        .collect()
}

#[derive(Serialize)]
struct TrainSummary {
    train: usize,
    validation: usize,
    test: usize,
    training: TrainReport,
    test_accuracy: AccuracyReport,
}

async fn train(a: TrainArgs) -> Result<(), CliError> {
    let spec = SplitSpec {
        seed: a.seed,
        ..SplitSpec::default()
    };
    let (train, validation, test) = if let Some(per_class) = a.synthetic_clusters {
        let data = GaussianClusters {
            per_class,
            seed: a.seed,
            ..GaussianClusters::default()
        }
        .generate();
        let [tr, va, te] = stratified_split_indices(&data.labels, &spec).map_err(runtime)?;
        (data.subset(&tr), data.subset(&va), data.subset(&te))
    } else {
        let items = load_items(a.data.as_deref().expect("clap requires data"))?;
        let split = stratified_split(&items, &spec).map_err(runtime)?;
        let (embedder, cache) = a.embedding.open()?;
        let embed = |part: Vec<LabeledQuery>| {
            let (embedder, cache) = (embedder.clone(), cache.clone());
            async move { embed_labeled(&part, embedder.as_ref(), &cache).await.map_err(runtime) }
        };
        (embed(split.train).await?, embed(split.validation).await?, embed(split.test).await?)
    };

    let mut cfg = TrainConfig {
        seed: a.seed,
        ..TrainConfig::default()
    };
    if let Some(m) = a.max_epochs {
        cfg.max_epochs = m;
    }
    let (model, report) = train_mlp_with_validation(&train, &validation, &cfg).map_err(runtime)?;
    save_model(&model, &a.out).map_err(runtime)?;
    let test_accuracy = routing_accuracy(&predict(&model, &test)?, &test.labels).map_err(runtime)?;
    println!(
        "trained {} epochs (best {}) in {:.1}s on {} samples; test accuracy {:.1}% over {}",
        report.epochs_run,
        report.best_epoch,
        report.wall_clock_seconds,
        train.len(),
        test_accuracy.accuracy * 100.0,
        test_accuracy.n
    );
    if let Some(path) = &a.report {
        let summary = TrainSummary {
            train: train.len(),
            validation: validation.len(),
            test: test.len(),
            training: report,
            test_accuracy,
        };
        write_json(path, &summary)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(path, text + "\n").map_err(runtime)
}

fn print_accuracy(r: &AccuracyReport) {
    println!("accuracy {:.2}% ({}/{})", r.accuracy * 100.0, r.correct, r.n);
    print!("{:>10}", "truth\\pred");
    for l in &r.labels {
        print!(" {:>9}", l.as_str());
    }
    println!();
    for (l, row) in r.labels.iter().zip(&r.confusion) {
        print!("{:>10}", l.as_str());
        for c in row {
            print!(" {c:>9}");
        }
        println!();
    }
}

async fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let model = load_model(existing(&a.model)?).map_err(runtime)?;
    let mut items = load_items(&a.data)?;
    if a.test_split {
        let spec = SplitSpec {
            seed: a.seed,
            ..SplitSpec::default()
        };
        items = stratified_split(&items, &spec).map_err(runtime)?.test;
    }
    let (embedder, cache) = a.embedding.open()?;
    let data = embed_labeled(&items, embedder.as_ref(), &cache).await.map_err(runtime)?;
    let report = routing_accuracy(&predict(&model, &data)?, &data.labels).map_err(runtime)?;
    print_accuracy(&report);
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

/// Loads a config file or builds a default one around `model`, applying the
/// command-line embedding choice when no file is given.
fn resolve_config(
    config: Option<&Path>,
    model: Option<&Path>,
    embedding: &EmbeddingArgs,
) -> Result<GatewayConfig, CliError> {
    let mut cfg = match config {
        Some(p) => GatewayConfig::load(existing(p)?)?,
        None => {
            let mut c = GatewayConfig::for_model(model.expect("clap requires model"));
            c.embedding = embedding.section();
            c
        }
    };
    if let Some(m) = model {
        cfg.model_path = m.to_path_buf();
    }
    existing(&cfg.model_path)?;
    Ok(cfg)
}

async fn route(a: RouteArgs) -> Result<(), CliError> {
    let cfg = resolve_config(a.config.as_deref(), a.model.as_deref(), &a.embedding)?;
    let shared = Shared::from_config(&cfg)?;
    let state = GatewayState::build(cfg, &shared, 1)?;
    let mut rc: RouterConfig = state.router.config().clone();
    if let Some(t) = a.threshold {
        rc.confidence_threshold = t;
    }
    match a.mode {
        Some(ModeArg::Argmax) => rc.mode = RouterMode::ArgmaxWithFallback,
        Some(ModeArg::CostAware) => {
            rc.mode = RouterMode::CostAware;
            rc.cost_params.get_or_insert_with(|| state.cost_params.clone());
        }
        None => {}
    }
    rc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    for (i, text) in a.text.iter().enumerate() {
        let query = Query::new(format!("cli-{i}"), text.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
        let r = state.router.route_with(&query, &rc).await.map_err(runtime)?;
        println!("{}", serde_json::to_string(&r).map_err(runtime)?);
    }
    Ok(())
}

async fn bench(a: BenchArgs) -> Result<(), CliError> {
    let cfg = resolve_config(a.config.as_deref(), a.model.as_deref(), &a.embedding)?;
    let items = load_items(&a.data)?;
    let shared = Shared::from_config(&cfg)?;
    let state = GatewayState::build(cfg, &shared, 1)?;

    let names: Vec<String> = if a.providers.is_empty() {
        state.providers.keys().cloned().collect()
    } else {
        a.providers.clone()
    };
    let providers = names
        .iter()
        .map(|n| {
            let (_, h) = state
                .provider(Some(n))
                .ok_or_else(|| CliError::Usage(format!("provider `{n}` is not configured")))?;
            Ok(BenchProvider {
                client: h.client.clone(),
                pricing: h.pricing.clone(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let queries: Vec<Query> = items.iter().map(|q| q.query.clone()).collect();
    let labels: Vec<TemplateId> = items.iter().map(|q| q.label.clone()).collect();
    let bench_cfg = BenchConfig {
        concurrency: a.concurrency,
        ..BenchConfig::default()
    };
    let outcome = run_bench(&queries, Some(&labels), &state.router, &state.registry, &providers, &bench_cfg)
        .await
        .map_err(runtime)?;

    let r = &outcome.report;
    for t in &r.routed.templates {
        println!("routed {:<10} {:>5} ({:.1}%)", t.template.as_str(), t.count, t.percent);
    }
    if let Some(acc) = &r.accuracy {
        println!("routing accuracy {:.1}%", acc.accuracy * 100.0);
    }
    print_savings(&r.savings);
    println!("{} queries in {:.2}s", r.queries, r.wall_clock_seconds);
    if let Some(path) = &a.out {
        export_report(&r.savings, ReportFormat::from_path(path), path).map_err(runtime)?;
    }
    if let Some(path) = &a.records {
        if path.exists() {
            std::fs::remove_file(path).map_err(runtime)?;
        }
        let ledger = UsageLedger::open(path).map_err(runtime)?;
        for rec in outcome.records {
            ledger.append(rec).map_err(runtime)?;
        }
    }
    Ok(())
}

fn print_savings(report: &SavingsReport) {
    println!(
        "{:<12} {:>8} {:>12} {:>12} {:>8}",
        "provider", "queries", "baseline", "actual", "saved%"
    );
    for p in report.providers.iter().chain(std::iter::once(&report.totals)) {
        println!(
            "{:<12} {:>8} {:>12} {:>12} {:>8}",
            p.provider,
            p.queries,
            p.baseline_tokens,
            p.actual_tokens,
            p.percent_display()
        );
    }
}

async fn serve(a: ServeArgs) -> Result<(), CliError> {
    let cfg = GatewayConfig::load(existing(&a.config)?)?;
    let listen = cfg.listen;
    let gw = Gateway::new(cfg, Some(a.config.clone()))?;
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(runtime)?;
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    crate::serve(gw, listener, shutdown).await.map_err(runtime)
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let records = read_ledger(existing(&a.ledger)?).map_err(runtime)?;
    let report = savings_vs_baseline_with(&records, a.include_degraded).map_err(runtime)?;
    print_savings(&report);
    if let Some(path) = &a.out {
        export_report(&report, ReportFormat::from_path(path), path).map_err(runtime)?;
    }
    Ok(())
}
