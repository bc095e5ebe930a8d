use std::sync::Arc;

use corpusmap_service::server::{serve, ServiceState};

/// Starts the service on an ephemeral port; returns its base URL. The server
/// stops when the runtime does.
pub async fn spawn(state: Arc<ServiceState>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, state, std::future::pending()));
    format!("http://{addr}")
}

/// Polls a retrain job until it leaves the queued/running states.
pub async fn wait_for_job(client: &reqwest::Client, base: &str, id: u64) -> serde_json::Value {
    loop {
        let status: serde_json::Value = client.get(format!("{base}/v1/retrain/{id}")).send().await.unwrap().json().await.unwrap();
        if status["state"] != "queued" && status["state"] != "running" {
            return status;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
}
