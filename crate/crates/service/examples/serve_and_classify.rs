//! Start the HTTP service on an ephemeral port, classify, relabel and retrain.

use std::time::Duration;

use corpusmap::classifier::train_all;
use corpusmap::synth::planted_mislabels;
use corpusmap::textpipe::Analyzer;
use corpusmap::{PhraseList, Stoplist, TrainConfig};
use corpusmap_service::server::{serve, ServiceOptions, ServiceState};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let planted = planted_mislabels(5, 0);
    let config = TrainConfig {
        min_category_size: 50,
        ..TrainConfig::default()
    };
    let bundle = train_all(&planted.dirty, &Analyzer::new(Stoplist::standard(), PhraseList::new()), &config)?;
    let mut options = ServiceOptions::default();
    options.outliers.min_category_size = 50;
    let state = ServiceState::new(bundle, planted.dirty.clone(), options);

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(serve(listener, state, std::future::pending()));
    let client = reqwest::Client::new();

    let doc = json!({ "title": "tp0x1 tp0x2", "abstract": "bg4 tp0x7", "authors": [] });
    let r: Value = client.post(format!("{base}/v1/classify")).json(&doc).send().await?.json().await?;
    println!("classify: {r}");

    let outliers: Value = client.get(format!("{base}/v1/outliers?category=target&k=5")).send().await?.json().await?;
    let top = outliers["outliers"][0].clone();
    println!("top outlier: {} (label {})", top["doc_id"], top["label"]);
    let action = if top["label"] == 1 { "move_out" } else { "move_in" };
    let verdicts = json!({ "category": "target", "verdicts": [{ "doc_id": top["doc_id"], "action": action }] });
    let summary: Value = client.post(format!("{base}/v1/relabel")).json(&verdicts).send().await?.json().await?;
    println!("relabel: {summary}");

    let job: Value = client.post(format!("{base}/v1/retrain")).json(&json!({ "category": "target" })).send().await?.json().await?;
    loop {
        let status: Value = client.get(format!("{base}/v1/retrain/{}", job["id"])).send().await?.json().await?;
        if status["state"] == "done" || status["state"] == "failed" {
            println!("retrain: {status}");
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let r: Value = client.post(format!("{base}/v1/classify")).json(&doc).send().await?.json().await?;
    println!("classify: {r}");
    Ok(())
}
