//! Trains a router on the 1,000-query fixture and runs the paired bench
//! against the three calibrated mock providers.

use std::sync::Arc;

use template_router::bench::{embed_labeled, run_bench, BenchConfig, BenchProvider};
use template_router::classifier::{train_mlp, TrainConfig};
use template_router::dataset::{stratified_split, SplitSpec};
use template_router::domain::{PricingTable, Query, TemplateId};
use template_router::embedding::{EmbeddingCache, LocalHashEmbedder};
use template_router::fixtures::SyntheticQueries;
use template_router::providers::{MockProvider, ProviderClient, ProviderProfile};
use template_router::router::{Router, RouterConfig};
use template_router::templates::TemplateRegistry;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let items = SyntheticQueries::default().generate();
    let embedder = Arc::new(LocalHashEmbedder);
    let cache = Arc::new(EmbeddingCache::in_memory());

    let split = stratified_split(&items, &SplitSpec::default())?;
    let train = embed_labeled(&split.train, embedder.as_ref(), &cache).await?;
    let (model, report) = train_mlp(&train, &TrainConfig::default())?;
    println!("trained {} epochs in {:.1}s", report.epochs_run, report.wall_clock_seconds);

    let router = Router::new(Arc::new(model), RouterConfig::default(), embedder, cache)?;
    let pricing = PricingTable::presets();
    let providers = ProviderProfile::presets()
        .into_iter()
        .map(|profile| {
            let row = pricing.get(&profile.name, &profile.model).cloned().expect("preset pricing");
            Ok(BenchProvider {
                client: ProviderClient::new(Arc::new(MockProvider::new(profile)?)),
                pricing: row,
            })
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;

    let queries: Vec<Query> = items.iter().map(|q| q.query.clone()).collect();
    let labels: Vec<TemplateId> = items.iter().map(|q| q.label.clone()).collect();
    let outcome = run_bench(
        &queries,
        Some(&labels),
        &router,
        &TemplateRegistry::default(),
        &providers,
        &BenchConfig::default(),
    )
    .await?;

    let r = &outcome.report;
    for t in &r.routed.templates {
        println!("routed {:<10} {:>4} ({:.1}%)", t.template.as_str(), t.count, t.percent);
    }
    if let Some(acc) = &r.accuracy {
        println!("routing accuracy {:.1}%", acc.accuracy * 100.0);
    }
    for p in r.savings.providers.iter().chain(std::iter::once(&r.savings.totals)) {
        println!(
            "{:<10} baseline {:>7} actual {:>7} saved {:>7} ({}%)",
            p.provider,
            p.baseline_tokens,
            p.actual_tokens,
            p.saved_tokens,
            p.percent_display()
        );
    }
    println!("bench took {:.1}s", r.wall_clock_seconds);
    Ok(())
}
