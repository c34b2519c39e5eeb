use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use template_router::bench::{run_bench, BenchConfig, BenchError, BenchProvider};
use template_router::classifier::{LabelCodec, MlpModel, Standardizer};
use template_router::domain::{PricingTable, Query, TemplateId};
use template_router::embedding::{DisabledEmbedder, Embedder, EmbeddingCache, LocalHashEmbedder, EMBEDDING_DIM};
use template_router::fixtures::SyntheticQueries;
use template_router::providers::{MockProvider, ProviderClient, ProviderProfile};
use template_router::router::{Router, RouterConfig};
use template_router::templates::TemplateRegistry;

fn router(embedder: Arc<dyn Embedder>) -> Router {
    let model = MlpModel::initialize(
        &[EMBEDDING_DIM, 32, 5],
        LabelCodec::canonical(),
        Standardizer::identity(EMBEDDING_DIM),
        0.01,
        1.0,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    Router::new(Arc::new(model), RouterConfig::default(), embedder, Arc::new(EmbeddingCache::in_memory())).unwrap()
}

fn providers() -> Vec<BenchProvider> {
    let pricing = PricingTable::presets();
    ProviderProfile::presets()
        .into_iter()
        .map(|p| BenchProvider {
            pricing: pricing.get(&p.name, &p.model).cloned().unwrap(),
            client: ProviderClient::new(Arc::new(MockProvider::new(p).unwrap())),
        })
        .collect()
}

fn queries(n: usize) -> (Vec<Query>, Vec<TemplateId>) {
    SyntheticQueries::balanced(n / 5, 11)
        .generate()
        .into_iter()
        .map(|q| (q.query, q.label))
        .unzip()
}

#[tokio::test]
async fn paired_records_per_provider_and_query() {
    let (qs, labels) = queries(100);
    let out = run_bench(
        &qs,
        Some(&labels),
        &router(Arc::new(LocalHashEmbedder)),
        &TemplateRegistry::default(),
        &providers(),
        &BenchConfig::default(),
    )
    .await
    .unwrap();
    assert_eq!(out.records.len(), 300);
    assert_eq!(out.report.queries, 100);
    assert_eq!(out.report.routed.n, 100);
    assert_eq!(out.report.accuracy.as_ref().unwrap().n, 100);
    for r in &out.records {
        assert!(r.success && !r.degraded && !r.baseline_estimated);
        assert!(r.output_tokens <= u64::from(template_router::templates::token_cap(&r.template)));
        assert!(r.baseline_output_tokens <= 500);
        if r.template == TemplateId::Verbose {
            // Same prompt, same deterministic mock draw.
            assert_eq!(r.output_tokens, r.baseline_output_tokens);
        }
    }
    let s = &out.report.savings;
    assert_eq!(s.providers.len(), 3);
    assert_eq!(s.totals.saved_tokens + s.totals.actual_tokens as i64, s.totals.baseline_tokens as i64);
}

#[tokio::test]
async fn bench_is_deterministic_across_concurrency() {
    let (qs, _) = queries(50);
    let r = router(Arc::new(LocalHashEmbedder));
    let reg = TemplateRegistry::default();
    let ps = providers();
    let a = run_bench(&qs, None, &r, &reg, &ps, &BenchConfig { concurrency: 1, ..BenchConfig::default() }).await.unwrap();
    let b = run_bench(&qs, None, &r, &reg, &ps, &BenchConfig { concurrency: 32, ..BenchConfig::default() }).await.unwrap();
    assert_eq!(a.report.savings, b.report.savings);
    assert!(a.report.accuracy.is_none());
}

#[tokio::test]
async fn embedding_outage_degrades_to_verbose() {
    let (qs, _) = queries(20);
    let out = run_bench(
        &qs,
        None,
        &router(Arc::new(DisabledEmbedder)),
        &TemplateRegistry::default(),
        &providers(),
        &BenchConfig::default(),
    )
    .await
    .unwrap();
    assert!(out.records.iter().all(|r| r.degraded && r.success && r.template == TemplateId::Verbose));
    assert_eq!(out.report.routed.count(&TemplateId::Verbose), 20);
    assert_eq!(out.report.savings.totals.degraded, 60);
    assert_eq!(out.report.savings.totals.baseline_tokens, 0);
}

#[tokio::test]
async fn config_errors() {
    let (qs, labels) = queries(10);
    let r = router(Arc::new(LocalHashEmbedder));
    let reg = TemplateRegistry::default();
    let err = run_bench(&qs, None, &r, &reg, &[], &BenchConfig::default()).await.err().unwrap();
    assert!(matches!(err, BenchError::Config(_)));
    let err = run_bench(&qs, Some(&labels[..3]), &r, &reg, &providers(), &BenchConfig::default())
        .await
        .err()
        .unwrap();
    assert!(matches!(err, BenchError::Config(_)));
}
