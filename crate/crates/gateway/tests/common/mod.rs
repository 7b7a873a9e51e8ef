#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use meter_client::MeterClient;
use meter_core::event::EventRecord;
use meter_gateway::{Gateway, GatewayConfig, Pacing};

pub fn fast_config(data_dir: &Path) -> GatewayConfig {
    GatewayConfig { data_dir: data_dir.to_path_buf(), pacing: Pacing::AsFastAsPossible, ..Default::default() }
}

pub async fn start(config: &GatewayConfig) -> (Gateway, MeterClient) {
    let gw = Gateway::start(config, SocketAddr::from(([127, 0, 0, 1], 0))).await.expect("gateway starts");
    let client = MeterClient::new(gw.url());
    (gw, client)
}

/// Polls `check` every few milliseconds until it returns `Some`, or panics after `limit`.
pub async fn eventually<T, F, Fut>(limit: Duration, mut check: F) -> T
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = Option<T>>,
{
    let deadline = tokio::time::Instant::now() + limit;
    loop {
        if let Some(v) = check().await {
            return v;
        }
        assert!(tokio::time::Instant::now() < deadline, "condition not met within {limit:?}");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

/// Reads `count` events from the SSE endpoint, with an optional Last-Event-ID.
pub async fn read_sse(url: &str, last_event_id: Option<u64>, count: usize) -> Vec<(u64, EventRecord)> {
    let http = reqwest::Client::new();
    let mut req = http.get(format!("{url}/events/stream"));
    if let Some(id) = last_event_id {
        req = req.header("Last-Event-ID", id.to_string());
    }
    let mut resp = req.send().await.expect("stream opens");
    assert_eq!(resp.status(), 200);
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < count {
        let chunk = tokio::time::timeout(Duration::from_secs(5), resp.chunk())
            .await
            .expect("event arrives")
            .expect("stream ok")
            .expect("stream not closed");
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let mut id = None;
            let mut data = None;
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = Some(v.trim().parse::<u64>().unwrap());
                } else if let Some(v) = line.strip_prefix("data:") {
                    data = Some(serde_json::from_str::<EventRecord>(v.trim()).unwrap());
                }
            }
            if let (Some(id), Some(data)) = (id, data) {
                out.push((id, data));
            }
        }
    }
    out
}
