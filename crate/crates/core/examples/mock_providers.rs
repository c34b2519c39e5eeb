//! Calibrated mock providers: mean output length per template.

use std::sync::Arc;

use template_router::domain::{Query, TemplateId};
use template_router::providers::{CompletionRequest, MockProvider, ProviderClient, ProviderProfile};
use template_router::templates::TemplateRegistry;

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = TemplateRegistry::default();
    for profile in ProviderProfile::presets() {
        let model = profile.model.clone();
        let client = ProviderClient::new(Arc::new(MockProvider::new(profile)?));
        let mut means = Vec::new();
        for t in TemplateId::CANONICAL.iter() {
            let mut total = 0u64;
            for i in 0..500 {
                let bundle = registry.render_prompt(&Query::new(format!("q{i}"), format!("question {i}"))?, t);
                let resp = client.complete(&CompletionRequest::new(client.name(), &model, bundle)).await?;
                total += u64::from(resp.output_tokens);
            }
            means.push(format!("{}={:.1}", t.as_str(), total as f64 / 500.0));
        }
        println!("{:<10} {}", client.name(), means.join(" "));
    }
    Ok(())
}
