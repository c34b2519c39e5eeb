use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use template_router::classifier::{LabelCodec, MlpModel, Standardizer};
use template_router::domain::{CostParams, ProbVector, Query, TemplateId};
use template_router::embedding::{local_test_embed, DisabledEmbedder, EmbeddingCache, LocalHashEmbedder, EMBEDDING_DIM};
use template_router::router::{decide, Router, RouterConfig, RouterError, RouterMode, DEFAULT_CONFIDENCE_THRESHOLD};

fn random_probs(rng: &mut impl Rng, spread: f64) -> ProbVector {
    let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>().powf(spread)).collect();
    let total: f64 = raw.iter().sum();
    let mut v: Vec<f64> = raw.iter().map(|x| x / total).collect();
    v[4] = 1.0 - v[..4].iter().sum::<f64>();
    ProbVector::new(v).unwrap()
}

fn cost_params() -> CostParams {
    CostParams::new(vec![0.00003, 0.00009, 0.00012, 0.00024, 0.0003], 0.0003, 0.0).unwrap()
}

/// Independent restatement of the decision rule.
fn oracle(p: &[f64], threshold: f64, costs: Option<&CostParams>) -> (usize, bool) {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    if p[best] < threshold {
        return (4, true);
    }
    match costs {
        None => (best, false),
        Some(c) => {
            let e: Vec<f64> = (0..p.len())
                .map(|i| c.per_template_cost[i] * p[i] + c.fallback_cost * (1.0 - p[i]))
                .collect();
            let mut arg = 0;
            for i in 1..e.len() {
                if e[i] < e[arg] {
                    arg = i;
                }
            }
            (arg, false)
        }
    }
}

#[test]
fn low_confidence_always_falls_back_to_verbose() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let argmax = RouterConfig::default();
    let cost_aware = RouterConfig::cost_aware(cost_params());
    let mut checked = 0;
    while checked < 10_000 {
        // Near-uniform draws; keep only those under the threshold.
        let p = random_probs(&mut rng, 0.3);
        if p.max() >= DEFAULT_CONFIDENCE_THRESHOLD {
            continue;
        }
        for cfg in [&argmax, &cost_aware] {
            let d = decide(&p, cfg).unwrap();
            assert_eq!(d.template, TemplateId::Verbose);
            assert!(d.fallback_applied);
            assert_eq!(d.confidence, p.max());
        }
        checked += 1;
    }
}

#[test]
fn decisions_match_duplicate_logic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = cost_params();
    for trial in 0..10_000 {
        let spread = 1.0 + 3.0 * rng.random::<f64>();
        let p = random_probs(&mut rng, spread);
        let threshold = rng.random::<f64>() * 0.6;
        let cost_aware = trial % 2 == 0;
        let cfg = if cost_aware {
            RouterConfig::cost_aware(params.clone()).with_threshold(threshold)
        } else {
            RouterConfig::default().with_threshold(threshold)
        };
        let d = decide(&p, &cfg).unwrap();
        let (index, fallback) = oracle(p.as_slice(), threshold, cost_aware.then_some(&params));
        assert_eq!(d.template.canonical_index(), Some(index), "trial {trial}: {p:?}");
        assert_eq!(d.fallback_applied, fallback);
        assert_eq!(d.expected_cost.is_some(), cost_aware);
    }
}

#[test]
fn fallback_is_monotone_in_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1_000 {
        let p = random_probs(&mut rng, 2.0);
        let mut fell_back = false;
        for step in 0..=20 {
            let d = decide(&p, &RouterConfig::default().with_threshold(step as f64 / 20.0)).unwrap();
            assert!(!fell_back || d.fallback_applied, "fallback stopped at higher threshold");
            fell_back = d.fallback_applied;
        }
        assert!(fell_back, "threshold 1.0 must fall back for {p:?}");
    }
}

#[test]
fn cost_aware_mode_requires_params() {
    let cfg = RouterConfig {
        mode: RouterMode::CostAware,
        cost_params: None,
        ..RouterConfig::default()
    };
    assert!(cfg.validate().is_err());
    assert!(RouterConfig::default().with_threshold(1.5).validate().is_err());
}

fn random_model() -> Arc<MlpModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = MlpModel::initialize(
        &[EMBEDDING_DIM, 512, 256, 128, 5],
        LabelCodec::canonical(),
        Standardizer::identity(EMBEDDING_DIM),
        0.01,
        1.0,
        &mut rng,
    )
    .unwrap();
    Arc::new(model)
}

fn router(model: Arc<MlpModel>) -> Router {
    Router::new(
        model,
        RouterConfig::default(),
        Arc::new(LocalHashEmbedder),
        Arc::new(EmbeddingCache::in_memory()),
    )
    .unwrap()
}

#[tokio::test]
async fn route_agrees_with_model_and_decide() {
    let model = random_model();
    let r = router(model.clone());
    for i in 0..50 {
        let q = Query::new(format!("q{i}"), format!("How do tides work, variant {i}?")).unwrap();
        let out = r.route(&q).await.unwrap();
        let probs = model.predict_proba(&local_test_embed(&q.text)).unwrap();
        let expected = decide(&probs, &RouterConfig::default()).unwrap();
        assert_eq!(out.decision(), expected);
        assert!((0.0..=1.0).contains(&out.confidence));
        assert!(out.total_latency_us >= out.decision_latency_us);

        let forced = r.route_with_threshold(&q, 1.0).await.unwrap();
        assert_eq!(forced.template, TemplateId::Verbose);
        assert!(forced.fallback_applied);
    }
}

#[tokio::test]
async fn batch_keeps_going_past_bad_items() {
    let r = router(random_model());
    let bad = Query {
        id: "blank".into(),
        text: "   ".into(),
        metadata: None,
    };
    let queries = vec![Query::new("a", "What is 2+2?").unwrap(), bad, Query::new("c", "Why?").unwrap()];
    let out = r.route_batch(&queries).await;
    assert!(out[0].is_ok());
    assert!(matches!(out[1], Err(RouterError::Domain(_))));
    assert!(out[2].is_ok());
}

#[tokio::test]
async fn embedding_outage_surfaces_as_error() {
    let r = Router::new(
        random_model(),
        RouterConfig::default(),
        Arc::new(DisabledEmbedder),
        Arc::new(EmbeddingCache::in_memory()),
    )
    .unwrap();
    let err = r.route(&Query::new("a", "hello").unwrap()).await.unwrap_err();
    assert!(matches!(err, RouterError::Embedding(_)));
}

#[tokio::test]
async fn warm_cache_p99_under_five_ms() {
    let r = router(random_model());
    let queries: Vec<Query> = (0..100)
        .map(|i| Query::new(format!("q{i}"), format!("Explain topic number {i} briefly.")).unwrap())
        .collect();
    for q in &queries {
        r.route(q).await.unwrap();
    }
    let mut micros = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let started = std::time::Instant::now();
        r.route(&queries[i % queries.len()]).await.unwrap();
        micros.push(started.elapsed().as_micros() as u64);
    }
    micros.sort_unstable();
    let p99 = micros[micros.len() * 99 / 100];
    eprintln!("p99 {p99} us");
    assert!(p99 < 5_000, "p99 {p99} us");
}
