//! Starts the HTTP service on an ephemeral port, requests recommendations
//! for a resume, records expert judgments for the served list and reads
//! the resulting metrics back.

use std::sync::Arc;

use occumatch::adfilter::Preprocessor;
use occumatch::centroid::CentroidOptions;
use occumatch::embedding::{Embedder, HashEmbedder};
use occumatch::pipeline::Spaces;
use occumatch::service::{router, spawn, AppState, RecommendResponse};
use occumatch::synthetic::{SyntheticConfig, SyntheticCorpus};
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let corpus = SyntheticCorpus::generate(SyntheticConfig::default());
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256, 0));
    let pre = Preprocessor::baseline_classifier();
    let index = Spaces::build(&corpus.occupations, &corpus.ads, embedder.as_ref(), &pre, CentroidOptions::default())?
        .job_index()?;
    let index_path = dir.path().join("jobs.cbidx.json");
    std::fs::write(&index_path, index.to_bytes())?;
    let state = AppState::new(
        index,
        index_path,
        corpus.occupations.clone(),
        embedder,
        pre,
        20,
        &dir.path().join("judgments.jsonl"),
    )?;
    let server = spawn(router(state.clone()), "127.0.0.1:0".parse()?)?;
    let base = server.base_url();
    let client = reqwest::blocking::Client::new();

    let health: Value = client.get(format!("{base}/api/health")).send()?.json()?;
    println!("health: {health}");

    let resume = format!("Berufserfahrung\n\n{}", corpus.occupations[3].description);
    let resp: RecommendResponse = client
        .post(format!("{base}/api/recommend"))
        .json(&json!({"text": resume, "k": 10}))
        .send()?
        .error_for_status()?
        .json()?;
    println!("session {}", resp.resume_id);
    for r in &resp.recommendations {
        println!("{:>2}. {} {} {:.4}", r.rank, r.esco_id, r.title, r.score);
    }

    for (i, r) in resp.recommendations.iter().enumerate() {
        for expert in ["e1", "e2"] {
            client
                .post(format!("{base}/api/judgments"))
                .json(&json!({
                    "resume_id": resp.resume_id,
                    "esco_id": r.esco_id,
                    "expert_id": expert,
                    "relevant": i < 3,
                }))
                .send()?
                .error_for_status()?;
        }
    }
    let metrics: Value = client
        .get(format!("{base}/api/metrics/{}?k=10", resp.resume_id))
        .send()?
        .json()?;
    println!("metrics: {metrics}");

    server.stop()?;
    drop(state);
    Ok(())
}
