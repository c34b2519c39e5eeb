#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use template_router::classifier::{save_model, train_mlp, LabeledData, TrainConfig};
use template_router::embedding::local_test_embed;
use template_router::fixtures::SyntheticQueries;
use template_router_gateway::{serve, Gateway, GatewayConfig};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

static SMALL_MODEL: OnceLock<PathBuf> = OnceLock::new();

/// A quickly trained text model, shared by every test in the binary.
pub fn small_model(tag: &str) -> PathBuf {
    SMALL_MODEL
        .get_or_init(|| {
            let items = SyntheticQueries::balanced(30, 7).generate();
            let vectors: Vec<_> = items.iter().map(|q| local_test_embed(&q.query.text)).collect();
            let data = LabeledData::from_embeddings(&vectors, items.iter().map(|q| q.label.clone()).collect()).unwrap();
            let cfg = TrainConfig {
                max_epochs: 30,
                ..TrainConfig::default()
            };
            let (model, _) = train_mlp(&data, &cfg).unwrap();
            let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("small-model-{tag}.bin"));
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            save_model(&model, &tmp).unwrap();
            std::fs::rename(&tmp, &path).unwrap();
            path
        })
        .clone()
}

pub struct Running {
    pub base: String,
    pub gateway: Arc<Gateway>,
    pub client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<std::io::Result<()>>>,
}

impl Running {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn post(&self, path: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
        let resp = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    pub async fn get(&self, path: &str) -> (u16, serde_json::Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            task.await.unwrap().unwrap();
        }
    }
}

pub async fn start(config: GatewayConfig, config_path: Option<PathBuf>) -> Running {
    let gateway = Gateway::new(config, config_path).expect("gateway starts");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(serve(gateway.clone(), listener, async {
        let _ = rx.await;
    }));
    Running {
        base,
        gateway,
        client: reqwest::Client::new(),
        stop: Some(tx),
        task: Some(task),
    }
}
