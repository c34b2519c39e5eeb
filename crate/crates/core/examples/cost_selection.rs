//! Expected-cost template selection and the PAC generalization bound.

use template_router::domain::{expected_cost, pac_bound, preset, select_cost_aware, ProbVector, TemplateId};
use template_router::templates::TemplateRegistry;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pricing = preset("openai", "gpt-4o-mini").ok_or("missing preset")?;
    let params = TemplateRegistry::default().cost_params(&pricing, 0.0)?;
    println!("per-template cost {:?}, fallback {}", params.per_template_cost, params.fallback_cost);

    for probs in [
        vec![0.70, 0.10, 0.10, 0.05, 0.05],
        vec![0.25, 0.25, 0.20, 0.15, 0.15],
        vec![0.05, 0.05, 0.10, 0.10, 0.70],
    ] {
        let p = ProbVector::new(probs)?;
        let choice = select_cost_aware(&params, &p)?;
        let costs: Vec<String> = (0..TemplateId::K)
            .map(|i| format!("{:.7}", expected_cost(i, &params, &p).unwrap()))
            .collect();
        println!("{:?} -> {} (E = [{}])", p.as_slice(), choice.template().unwrap(), costs.join(", "));
    }

    for n in [1_000, 11_100, 100_000] {
        println!("PAC bound at n = {n}: {:.4}", pac_bound(0.095, n, 100.0, 0.05)?);
    }
    Ok(())
}
