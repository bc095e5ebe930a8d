mod common;

use std::sync::Arc;

use corpusmap::classifier::train_all;
use corpusmap::curation::VerdictLog;
use corpusmap::synth::planted_mislabels;
use corpusmap::textpipe::Analyzer;
use corpusmap::{Document, PhraseList, PredictMode, Stoplist, TrainConfig};
use corpusmap_service::server::{classify_results, ClassifyResponse, ServiceOptions, ServiceState};
use reqwest::StatusCode;
use serde_json::{json, Value};

use common::{spawn, wait_for_job};

struct Setup {
    base: String,
    client: reqwest::Client,
    state: Arc<ServiceState>,
    flipped: Vec<(String, &'static str)>,
    _dir: tempfile::TempDir,
}

async fn setup() -> Setup {
    let planted = planted_mislabels(5, 4);
    let config = TrainConfig {
        min_category_size: 50,
        ..TrainConfig::default()
    };
    let analyzer = Analyzer::new(Stoplist::standard(), PhraseList::new());
    let bundle = train_all(&planted.dirty, &analyzer, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut options = ServiceOptions {
        verdict_log: Some(VerdictLog::new(dir.path().join("log.jsonl"))),
        ..ServiceOptions::default()
    };
    options.outliers.min_category_size = 50;
    let flipped = planted
        .flipped
        .iter()
        .map(|id| (id.clone(), if planted.dirty.get(id).unwrap().has_label("target") { "move_out" } else { "move_in" }))
        .collect();
    let state = ServiceState::new(bundle, planted.dirty, options);
    Setup {
        base: spawn(Arc::clone(&state)).await,
        client: reqwest::Client::new(),
        state,
        flipped,
        _dir: dir,
    }
}

impl Setup {
    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }
}

#[tokio::test]
async fn classify_matches_in_process_prediction() {
    let s = setup().await;
    let body = json!({ "title": "tp0x1 tp0x2 bg3", "abstract": "tp0x5 bg10 bg11", "authors": ["x_tp0a1"] });
    let (status, v) = s.post("/v1/classify", body).await;
    assert_eq!(status, StatusCode::OK);
    let got: ClassifyResponse = serde_json::from_value(v).unwrap();
    let doc = Document::new("q", "tp0x1 tp0x2 bg3", "tp0x5 bg10 bg11").with_authors(["x_tp0a1"]);
    let expected = classify_results(s.state.snapshot().bundle.predict(&doc, PredictMode::Calibrated));
    assert_eq!(got.generation, 0);
    assert_eq!(got.results, expected);

    let (_, raw) = s.post("/v1/classify", json!({ "title": "bg1", "mode": "raw" })).await;
    assert_eq!(raw["results"][0]["category"], "target");
}

#[tokio::test]
async fn bad_requests_get_400_and_service_survives() {
    let s = setup().await;
    let r = s
        .client
        .post(format!("{}/v1/classify", s.base))
        .header("content-type", "application/json")
        .body("{\"title\": ")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["error"]["kind"], "invalid_input");
    assert_eq!(s.post("/v1/classify", json!({ "title": 3 })).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(s.post("/v1/classify", json!({})).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(s.post("/v1/relabel", json!({ "verdicts": [] })).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(s.get("/v1/outliers").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(s.post("/v1/classify", json!({ "title": "bg1" })).await.0, StatusCode::OK);
}

#[tokio::test]
async fn categories_and_weights() {
    let s = setup().await;
    let (status, v) = s.get("/v1/categories").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["categories"][0]["category"], "target");
    assert_eq!(v["categories"][0]["positives"], s.state.corpus().await.positives("target"));
    assert_eq!(v["skipped"], json!([]));

    let (status, w) = s.get("/v1/weights?category=target&k=5").await;
    assert_eq!(status, StatusCode::OK);
    let pos = w["positive"].as_array().unwrap();
    assert_eq!(pos.len(), 5);
    assert!(pos.windows(2).all(|p| p[0]["weight"].as_f64() >= p[1]["weight"].as_f64()));
    assert!(w["negative"][0]["weight"].as_f64().unwrap() < 0.0);

    let (status, e) = s.get("/v1/weights?category=nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(e["error"]["kind"], "unknown_category");
    assert_eq!(s.get("/v1/weights?category=target&k=0").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn relabel_then_retrain_updates_outliers_and_model() {
    let s = setup().await;
    let (status, before) = s.get("/v1/outliers?category=target&k=10").await;
    assert_eq!(status, StatusCode::OK);
    let ranked: Vec<&str> = before["outliers"].as_array().unwrap().iter().map(|o| o["doc_id"].as_str().unwrap()).collect();
    assert_eq!(ranked.len(), 10);

    let verdicts: Vec<Value> = s.flipped.iter().map(|(id, a)| json!({ "doc_id": id, "action": a, "note": "" })).collect();
    let (status, summary) = s.post("/v1/relabel", json!({ "category": "target", "verdicts": verdicts })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["moved_in"].as_u64().unwrap() + summary["moved_out"].as_u64().unwrap(), 5);
    assert_eq!(summary["positives_after"], 80);

    // outliers reflect the new labels before any retrain
    let (_, after) = s.get("/v1/outliers?category=target&k=10").await;
    for o in after["outliers"].as_array().unwrap() {
        let id = o["doc_id"].as_str().unwrap();
        let doc = s.state.corpus().await.get(id).unwrap().clone();
        assert_eq!(o["label"].as_i64().unwrap(), i64::from(doc.sign("target")));
    }
    assert_eq!(after["generation"], 0);

    let (status, job) = s.post("/v1/retrain", json!({ "category": "target" })).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let done = wait_for_job(&s.client, &s.base, job["id"].as_u64().unwrap()).await;
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(done["generation"], 1);
    let (_, cats) = s.get("/v1/categories").await;
    assert_eq!(cats["generation"], 1);
    let (_, c) = s.post("/v1/classify", json!({ "title": "bg1" })).await;
    assert_eq!(c["generation"], 1);

    let log = std::fs::read_to_string(s._dir.path().join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 5);
}

#[tokio::test]
async fn relabel_batches_are_atomic() {
    let s = setup().await;
    let (id, action) = &s.flipped[0];
    let bad = json!({ "category": "target", "verdicts": [
        { "doc_id": id, "action": action },
        { "doc_id": "no-such-doc", "action": "keep" },
    ]});
    let (status, e) = s.post("/v1/relabel", bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(e["error"]["kind"], "unknown_document");
    let contradictory = json!({ "category": "target", "verdicts": [
        { "doc_id": id, "action": "move_in" },
        { "doc_id": id, "action": "move_out" },
    ]});
    assert_eq!(s.post("/v1/relabel", contradictory).await.1["error"]["kind"], "contradictory_verdicts");
    assert_eq!(*s.state.corpus().await, planted_mislabels(5, 4).dirty);
}

#[tokio::test]
async fn concurrent_relabels_apply_in_a_total_order() {
    let s = setup().await;
    let ids: Vec<String> = s.state.corpus().await.iter().filter(|d| !d.has_label("target")).take(20).map(|d| d.id.clone()).collect();
    let mut tasks = Vec::new();
    for id in ids {
        let client = s.client.clone();
        let url = format!("{}/v1/relabel", s.base);
        tasks.push(tokio::spawn(async move {
            let body = json!({ "category": "target", "verdicts": [{ "doc_id": id, "action": "move_in" }] });
            client.post(url).json(&body).send().await.unwrap().json::<Value>().await.unwrap()
        }));
    }
    let start = s.state.corpus().await.positives("target") as u64;
    let mut befores = Vec::new();
    for t in tasks {
        let v = t.await.unwrap();
        assert_eq!(v["moved_in"], 1);
        assert_eq!(v["positives_after"].as_u64().unwrap(), v["positives_before"].as_u64().unwrap() + 1);
        befores.push(v["positives_before"].as_u64().unwrap());
    }
    befores.sort_unstable();
    assert_eq!(befores, (start..start + 20).collect::<Vec<u64>>());
}

#[tokio::test]
async fn retrain_errors_are_reported() {
    let s = setup().await;
    let (_, job) = s.post("/v1/retrain", json!({ "category": "absent" })).await;
    let status = wait_for_job(&s.client, &s.base, job["id"].as_u64().unwrap()).await;
    assert_eq!(status["state"], "failed");
    assert_eq!(status["kind"], "category_too_small");
    assert_eq!(s.get("/v1/retrain/999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.get("/v1/retrain/abc").await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.get("/v1/categories").await.1["generation"], 0);
}
