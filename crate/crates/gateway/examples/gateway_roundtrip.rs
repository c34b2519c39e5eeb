//! Starts the gateway in-process on an ephemeral port and exercises each endpoint.

use serde_json::json;
use template_router::classifier::{save_model, train_mlp, LabeledData, TrainConfig};
use template_router::embedding::local_test_embed;
use template_router::fixtures::SyntheticQueries;
use template_router_gateway::{serve, Gateway, GatewayConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let items = SyntheticQueries::balanced(40, 5).generate();
    let vectors: Vec<_> = items.iter().map(|q| local_test_embed(&q.query.text)).collect();
    let data = LabeledData::from_embeddings(&vectors, items.iter().map(|q| q.label.clone()).collect())?;
    let (model, _) = train_mlp(&data, &TrainConfig::default())?;
    let dir = tempfile::tempdir()?;
    let model_path = dir.path().join("router.bin");
    save_model(&model, &model_path)?;

    let gateway = Gateway::new(GatewayConfig::for_model(&model_path), None)?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(gateway, listener, async {
        let _ = stopped.await;
    }));

    let http = reqwest::Client::new();
    let route: serde_json::Value = http
        .post(format!("{base}/v1/route"))
        .json(&json!({"id": "r1", "text": "What is 2+2?"}))
        .send()
        .await?
        .json()
        .await?;
    println!("route    {route}");

    for provider in ["gemini", "openai", "anthropic"] {
        let done: serde_json::Value = http
            .post(format!("{base}/v1/complete"))
            .json(&json!({"text": "Explain how a refrigerator works.", "provider": provider}))
            .send()
            .await?
            .json()
            .await?;
        println!(
            "complete {provider:<9} template {} output {} tokens, cost ${} vs baseline ${}",
            done["template"], done["output_tokens"], done["cost"], done["baseline_cost"]
        );
    }

    let stats: serde_json::Value = http.get(format!("{base}/v1/stats")).send().await?.json().await?;
    println!("stats    {}", serde_json::to_string_pretty(&stats["savings"]["totals"])?);

    let _ = stop.send(());
    server.await??;
    Ok(())
}
