//! Routes free-text queries with confidence fallback and in cost-aware mode.

use std::sync::Arc;

use template_router::bench::embed_labeled;
use template_router::classifier::{train_mlp, TrainConfig};
use template_router::domain::{preset, Query};
use template_router::embedding::{EmbeddingCache, LocalHashEmbedder};
use template_router::fixtures::SyntheticQueries;
use template_router::router::{Router, RouterConfig};
use template_router::templates::TemplateRegistry;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = Arc::new(LocalHashEmbedder);
    let cache = Arc::new(EmbeddingCache::in_memory());
    let items = SyntheticQueries::balanced(60, 11).generate();
    let data = embed_labeled(&items, embedder.as_ref(), &cache).await?;
    let (model, _) = train_mlp(&data, &TrainConfig::default())?;

    let params = TemplateRegistry::default().cost_params(&preset("openai", "gpt-4o-mini").unwrap(), 0.0)?;
    let router = Router::new(Arc::new(model), RouterConfig::default(), embedder, cache)?;
    let cost_aware = RouterConfig::cost_aware(params);
    for (i, text) in [
        "What is the capital of France?",
        "Give me a bottom-line summary of cloud costs for the board.",
        "Walk me through the proof that the square root of two is irrational.",
        "Describe in depth how the immune system responds to a virus.",
        "banana",
    ]
    .iter()
    .enumerate()
    {
        let q = Query::new(format!("q{i}"), *text)?;
        let a = router.route(&q).await?;
        let b = router.route_with(&q, &cost_aware).await?;
        println!(
            "{:<10} p*={:.2} fallback={:<5} cost-aware={:<10} {} us  {text}",
            a.template.as_str(),
            a.confidence,
            a.fallback_applied,
            b.template.as_str(),
            a.total_latency_us
        );
    }
    Ok(())
}
