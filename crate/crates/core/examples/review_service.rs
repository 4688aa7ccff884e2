//! Start the review API on a local port, submit a verdict and read it back.

use collusion::detect::{run_detection, DetectConfig, Threshold};
use collusion::service::{router, AppState, Snapshot, VerdictStore};
use collusion::simulate::{generate, SimConfig};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let (dataset, _) = generate(&SimConfig {
        num_players: 600,
        num_matches: 400,
        colluder_pairs: 3,
        seed: 2,
        ..SimConfig::default()
    })?;
    let cfg = DetectConfig {
        threshold: Threshold::TopK(10),
        ..DetectConfig::default()
    };
    let report = run_detection(&dataset, &cfg)?.report;

    let dir = tempfile::tempdir()?;
    let store = VerdictStore::open(&dir.path().join("verdicts.jsonl"))?;
    let state = AppState::new(Some(Snapshot::new(report, dataset)), store);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}/api/v1", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });

    let http = reqwest::Client::new();
    let page: Value = http
        .get(format!("{base}/pairs?limit=3"))
        .send()
        .await?
        .json()
        .await?;
    println!("queue has {} pairs; top 3:", page["total"]);
    for e in page["entries"].as_array().into_iter().flatten() {
        println!(
            "  {} {} score {:.3}",
            e["pair_a"],
            e["pair_b"],
            e["anomaly_score"].as_f64().unwrap_or(f64::NAN)
        );
    }

    let top = &page["entries"][0];
    let (a, b) = (
        top["pair_a"].as_str().unwrap_or_default(),
        top["pair_b"].as_str().unwrap_or_default(),
    );
    let stored: Value = http
        .post(format!("{base}/pairs/{a}/{b}/verdict"))
        .json(&json!({"status": "confirmed", "notes": "same lobby six times", "reviewer": "demo"}))
        .send()
        .await?
        .json()
        .await?;
    println!("\nstored verdict: {stored}");

    let detail: Value = http
        .get(format!("{base}/pairs/{b}/{a}"))
        .send()
        .await?
        .json()
        .await?;
    println!(
        "latest status {}, timeline of {} matches",
        detail["verdict"]["status"],
        detail["timeline"].as_array().map_or(0, Vec::len)
    );
    let stats: Value = http
        .get(format!("{base}/stats"))
        .send()
        .await?
        .json()
        .await?;
    println!("verdict tallies {}", stats["verdicts"]);
    Ok(())
}
