use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use template_router::domain::{expected_cost, pac_bound, select_cost_aware, CostParams, ProbVector};

/// Enumerates every template and keeps the first strict minimum.
fn brute_force(params: &CostParams, probs: &ProbVector) -> (usize, f64) {
    let costs: Vec<f64> = (0..params.k())
        .map(|i| expected_cost(i, params, probs).unwrap())
        .collect();
    let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let index = costs.iter().position(|&c| c == min).unwrap();
    (index, min)
}

fn random_probs(rng: &mut impl Rng, k: usize) -> ProbVector {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    let mut v: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let rest: f64 = v[..k - 1].iter().sum();
    v[k - 1] = (1.0 - rest).max(0.0);
    ProbVector::new(v).unwrap()
}

#[test]
fn cost_aware_selection_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let started = std::time::Instant::now();
    let mut ties = 0;
    for trial in 0..20_000 {
        let k = if trial % 4 == 0 { rng.random_range(1..=8) } else { 5 };
        let mut costs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.01)).collect();
        if trial % 7 == 0 && k > 1 {
            // Force exact cost ties.
            costs[k - 1] = costs[0];
            ties += 1;
        }
        let fallback = rng.random_range(0.0..0.02);
        let params = CostParams::new(costs, fallback, 0.0).unwrap();
        let probs = if trial % 11 == 0 {
            ProbVector::uniform(k)
        } else {
            random_probs(&mut rng, k)
        };
        let choice = select_cost_aware(&params, &probs).unwrap();
        let (index, min) = brute_force(&params, &probs);
        assert_eq!(choice.index, index, "trial {trial}: {params:?} {probs:?}");
        assert_eq!(choice.expected_cost.to_bits(), min.to_bits());
    }
    assert!(ties > 0);
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn pac_fixture_matches_high_precision_value() {
    let b = pac_bound(0.095, 11_100, 100.0, 0.05).unwrap();
    assert!((b - 0.251_632_605_769_602_6).abs() < 1e-12, "{b}");
}

#[test]
fn pac_bound_monotone_over_grid() {
    let ns = [500u64, 1_000, 5_000, 11_100, 50_000, 1_000_000];
    let ds = [1.0, 10.0, 50.0, 100.0, 200.0];
    let deltas = [0.2, 0.1, 0.05, 0.01, 0.001];
    for &d in &ds {
        for &delta in &deltas {
            let bounds: Vec<f64> = ns.iter().map(|&n| pac_bound(0.1, n, d, delta).unwrap()).collect();
            assert!(bounds.windows(2).all(|w| w[1] <= w[0]), "n: d={d} delta={delta} {bounds:?}");
        }
    }
    for &n in &ns {
        for &delta in &deltas {
            let bounds: Vec<f64> = ds.iter().map(|&d| pac_bound(0.1, n, d, delta).unwrap()).collect();
            assert!(bounds.windows(2).all(|w| w[1] >= w[0]), "d: n={n} delta={delta} {bounds:?}");
        }
        for &d in &ds {
            let bounds: Vec<f64> = deltas.iter().map(|&x| pac_bound(0.1, n, d, x).unwrap()).collect();
            assert!(bounds.windows(2).all(|w| w[1] >= w[0]), "delta: n={n} d={d} {bounds:?}");
        }
    }
}

proptest! {
    #[test]
    fn expected_cost_lies_between_template_and_fallback(
        c in 0.0f64..1.0, fb in 0.0f64..1.0, p in 0.0f64..=1.0,
    ) {
        let q = 1.0 - p;
        let params = CostParams::new(vec![c, fb], fb, 0.0).unwrap();
        let probs = ProbVector::new(vec![p, q]).unwrap();
        let e = expected_cost(0, &params, &probs).unwrap();
        prop_assert!(e >= c.min(fb) - 1e-15 && e <= c.max(fb) + 1e-15);
    }

    #[test]
    fn selected_cost_never_exceeds_any_alternative(
        costs in prop::collection::vec(0.0f64..1.0, 5),
        fb in 0.0f64..1.0,
        weights in prop::collection::vec(0.01f64..1.0, 5),
    ) {
        let total: f64 = weights.iter().sum();
        let mut p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        p[4] = 1.0 - p[..4].iter().sum::<f64>();
        let probs = ProbVector::new(p).unwrap();
        let params = CostParams::new(costs, fb, 0.0).unwrap();
        let choice = select_cost_aware(&params, &probs).unwrap();
        for i in 0..5 {
            prop_assert!(choice.expected_cost <= expected_cost(i, &params, &probs).unwrap());
        }
    }
}
