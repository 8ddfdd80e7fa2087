//! Trains a throwaway checkpoint, registers it and serves the HTTP API.
//!
//! cargo run --release --example serve_api [addr]
//!
//! curl -s localhost:8080/v1/checkpoints
//! curl -s -XPOST localhost:8080/v1/generate -d '{"prompt":"Turkish Patterns","checkpoint_id":"demo","seed":1}'

use ttx::dataset::{load_taxonomy, split_manifest, synthesize_corpus, ImageSize, SyntheticCorpusSpec};
use ttx::service::{serve, AppState, Registry};
use ttx::train::finetune;
use ttx::TrainConfig;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    let taxonomy = load_taxonomy();
    let corpus = synthesize_corpus(&SyntheticCorpusSpec::standard(2, 16, ImageSize::square(16), 5), &taxonomy)?;
    let (train, val) = split_manifest(&corpus, 0.2, 5)?;
    let config = TrainConfig {
        epochs: 3,
        hidden: 64,
        ..TrainConfig::default()
    };
    let checkpoint = tokio::task::spawn_blocking(move || finetune(None, &train, &val, &config)).await??;

    let mut registry = Registry::new();
    registry.insert("demo", checkpoint);
    serve(AppState::new(registry, taxonomy, 2), &addr).await
}
