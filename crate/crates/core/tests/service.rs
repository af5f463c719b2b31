mod common;

use std::sync::Arc;

use occumatch::adfilter::Preprocessor;
use occumatch::embedding::{Embedder, HashEmbedder};
use occumatch::evaluation::{read_judgments, HumanEvalMetrics, Judgment};
use occumatch::matcher::{build_index, IndexMetadata};
use occumatch::service::{AppState, HealthResponse, IndexInfo, RecommendResponse, ServiceError};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::json;

fn recommend(client: &Client, f: &common::Fixture, body: serde_json::Value) -> (StatusCode, serde_json::Value) {
    let resp = client.post(f.url("/api/recommend")).json(&body).send().unwrap();
    let status = resp.status();
    (status, resp.json().unwrap())
}

fn judge(client: &Client, f: &common::Fixture, resume: &str, job: &str, expert: &str, relevant: bool) -> StatusCode {
    client
        .post(f.url("/api/judgments"))
        .json(&json!({"resume_id": resume, "esco_id": job, "expert_id": expert, "relevant": relevant}))
        .send()
        .unwrap()
        .status()
}

#[test]
fn description_text_ranks_its_occupation_first() {
    let f = common::service(30, Preprocessor::token_cutoff());
    let client = Client::new();
    let occ = &f.corpus.occupations[7];
    let (status, body) = recommend(&client, &f, json!({"text": occ.description}));
    assert_eq!(status, StatusCode::OK);
    let resp: RecommendResponse = serde_json::from_value(body).unwrap();
    assert_eq!(resp.recommendations.len(), 20);
    // Job centroids blend in ads, so the description is close but not identical.
    assert_eq!(resp.recommendations[0].esco_id, occ.esco_id);
    assert_eq!(resp.recommendations[0].title, occ.title);
    assert_eq!(resp.recommendations[0].description, occ.description);
    let ranks: Vec<usize> = resp.recommendations.iter().map(|r| r.rank).collect();
    assert_eq!(ranks, (1..=20).collect::<Vec<_>>());
    assert!(resp.recommendations.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn self_similarity_against_description_index() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::corpus(25);
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256, 0));
    let index = build_index(
        corpus
            .occupations
            .iter()
            .map(|o| (o.esco_id.clone(), embedder.embed_one(&o.description).unwrap())),
        IndexMetadata {
            model: embedder.info().model,
            centroid_kind: "descriptions".into(),
            built_at: None,
        },
    )
    .unwrap();
    let state = AppState::new(
        index,
        dir.path().join("unused.cbidx.json"),
        corpus.occupations.clone(),
        embedder,
        Preprocessor::token_cutoff(),
        20,
        &dir.path().join("j.jsonl"),
    )
    .unwrap();
    let server = occumatch::service::spawn(occumatch::service::router(state), "127.0.0.1:0".parse().unwrap()).unwrap();
    let occ = &corpus.occupations[3];
    let resp: RecommendResponse = Client::new()
        .post(format!("{}/api/recommend", server.base_url()))
        .json(&json!({"text": occ.description, "k": 5}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(resp.recommendations.len(), 5);
    assert_eq!(resp.recommendations[0].esco_id, occ.esco_id);
    assert!((resp.recommendations[0].score - 1.0).abs() < 1e-12);
}

#[test]
fn recommend_validation() {
    let f = common::service(30, Preprocessor::token_cutoff());
    let client = Client::new();
    assert_eq!(recommend(&client, &f, json!({"text": "  \n "})).0, StatusCode::BAD_REQUEST);
    assert_eq!(recommend(&client, &f, json!({"text": "a b", "k": 0})).0, StatusCode::BAD_REQUEST);
    assert_eq!(recommend(&client, &f, json!({"text": "a b", "k": 101})).0, StatusCode::BAD_REQUEST);
    assert_eq!(recommend(&client, &f, json!({"text": "!!! ???"})).0, StatusCode::BAD_REQUEST);
    assert_eq!(recommend(&client, &f, json!({"k": 3})).0, StatusCode::BAD_REQUEST);
    let (status, body) = recommend(&client, &f, json!({"text": "a", "resume_id": "nope"}));
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("nope"));
    // An index smaller than k returns the whole index.
    let (status, body) = recommend(&client, &f, json!({"text": "kalo mine", "k": 100}));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["recommendations"].as_array().unwrap().len(), 30);
}

#[test]
fn sessions_are_updated_in_place() {
    let f = common::service(30, Preprocessor::token_cutoff());
    let client = Client::new();
    let (_, first) = recommend(&client, &f, json!({"text": f.corpus.occupations[0].description}));
    let id = first["resume_id"].as_str().unwrap().to_owned();
    let (status, second) = recommend(
        &client,
        &f,
        json!({"text": f.corpus.occupations[1].description, "resume_id": id}),
    );
    assert_eq!(status, StatusCode::OK);
    assert_eq!(second["resume_id"], id.as_str());
    let session = f.state.session(&id).unwrap();
    assert_eq!(session.text, f.corpus.occupations[1].description);
    assert_eq!(session.served[0], f.corpus.occupations[1].esco_id);
    assert!(session.updated_at >= session.created_at);
}

#[test]
fn job_lookup() {
    let f = common::service(10, Preprocessor::token_cutoff());
    let client = Client::new();
    let resp = client.get(f.url("/api/jobs/occ004")).send().unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let occ: occumatch::corpus::EscoOccupation = resp.json().unwrap();
    assert_eq!(occ, f.corpus.occupations[4]);
    assert_eq!(client.get(f.url("/api/jobs/zzz")).send().unwrap().status(), StatusCode::NOT_FOUND);
}

#[test]
fn judgments_and_metrics() {
    let f = common::service(30, Preprocessor::token_cutoff());
    let client = Client::new();
    let (_, body) = recommend(&client, &f, json!({"text": f.corpus.occupations[2].description}));
    let resume = body["resume_id"].as_str().unwrap().to_owned();
    let served: Vec<String> = body["recommendations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["esco_id"].as_str().unwrap().to_owned())
        .collect();

    let metrics_url = f.url(&format!("/api/metrics/{resume}"));
    assert_eq!(client.get(&metrics_url).send().unwrap().status(), StatusCode::CONFLICT);
    assert_eq!(
        client.get(f.url("/api/metrics/unknown")).send().unwrap().status(),
        StatusCode::NOT_FOUND
    );

    assert_eq!(judge(&client, &f, "unknown", &served[0], "e1", true), StatusCode::NOT_FOUND);
    let never_served = f
        .corpus
        .occupations
        .iter()
        .find(|o| !served.contains(&o.esco_id))
        .unwrap();
    assert_eq!(
        judge(&client, &f, &resume, &never_served.esco_id, "e1", true),
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(judge(&client, &f, &resume, &served[0], "", true), StatusCode::BAD_REQUEST);

    // 16 of 20 relevant, first item relevant.
    for (i, job) in served.iter().enumerate() {
        assert_eq!(judge(&client, &f, &resume, job, "e1", i < 16), StatusCode::OK);
    }
    let m: HumanEvalMetrics = client.get(&metrics_url).send().unwrap().json().unwrap();
    assert_eq!(m.p_at_k, 0.8);
    assert_eq!(m.mrr_at_k, 1.0);
    assert_eq!(m.relevant_count, 16);
    assert_eq!(m.n_experts, 1);

    // Re-judging overrides: the first item becomes irrelevant.
    assert_eq!(judge(&client, &f, &resume, &served[0], "e1", false), StatusCode::OK);
    let m: HumanEvalMetrics = client.get(&metrics_url).send().unwrap().json().unwrap();
    assert_eq!(m.p_at_k, 0.75);
    assert_eq!(m.mrr_at_k, 0.5);

    let m: HumanEvalMetrics = client
        .get(format!("{metrics_url}?k=5"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(m.p_at_k, 0.8);
    assert_eq!(
        client.get(format!("{metrics_url}?k=0")).send().unwrap().status(),
        StatusCode::BAD_REQUEST
    );

    // The durable log holds every acknowledged judgment in order.
    let log = read_judgments(std::io::BufReader::new(std::fs::File::open(&f.log_path).unwrap())).unwrap();
    assert_eq!(log.len(), 21);
    assert_eq!(
        log.last().unwrap(),
        &Judgment {
            resume_id: resume.clone(),
            esco_id: served[0].clone(),
            expert_id: "e1".into(),
            relevant: false,
        }
    );
}

#[test]
fn zero_relevant_gives_zero_metrics() {
    let f = common::service(30, Preprocessor::token_cutoff());
    let client = Client::new();
    let (_, body) = recommend(&client, &f, json!({"text": "kalo"}));
    let resume = body["resume_id"].as_str().unwrap().to_owned();
    for r in body["recommendations"].as_array().unwrap() {
        judge(&client, &f, &resume, r["esco_id"].as_str().unwrap(), "e", false);
    }
    let m: HumanEvalMetrics = client
        .get(f.url(&format!("/api/metrics/{resume}")))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!((m.map_at_k, m.p_at_k, m.mrr_at_k), (0.0, 0.0, 0.0));
}

#[test]
fn judgment_log_survives_restart() {
    let f = common::service(10, Preprocessor::token_cutoff());
    let client = Client::new();
    let (_, body) = recommend(&client, &f, json!({"text": "kalo", "k": 3}));
    let resume = body["resume_id"].as_str().unwrap().to_owned();
    let job = body["recommendations"][0]["esco_id"].as_str().unwrap().to_owned();
    judge(&client, &f, &resume, &job, "e1", true);
    let reopened = AppState::new(
        f.index.clone(),
        f.index_path.clone(),
        f.corpus.occupations.clone(),
        Arc::new(HashEmbedder::new(256, 0)),
        Preprocessor::token_cutoff(),
        20,
        &f.log_path,
    )
    .unwrap();
    assert_eq!(reopened.judgment_set().votes(&resume, &job), [true]);
}

#[test]
fn health_and_reload() {
    let f = common::service(10, Preprocessor::baseline_classifier());
    let client = Client::new();
    let h: HealthResponse = client.get(f.url("/api/health")).send().unwrap().json().unwrap();
    assert_eq!(h.status, "ok");
    assert_eq!(h.index.count, 10);
    assert_eq!(h.index.dim, 256);
    assert_eq!(h.index.metadata.centroid_kind, "job_centroids");
    assert_eq!(h.provider.dim, 256);
    assert_eq!(h.filter_mode, occumatch::adfilter::FilterMode::Classifier);

    // Rewrite the snapshot with five entries and reload it.
    let smaller = build_index(
        f.index.entries()[..5].iter().map(|e| (e.id.clone(), e.vector.clone())),
        f.index.metadata().clone(),
    )
    .unwrap();
    common::save_index(&smaller, &f.index_path);
    let info: IndexInfo = client.post(f.url("/api/admin/reload")).send().unwrap().json().unwrap();
    assert_eq!(info.count, 5);
    let h: HealthResponse = client.get(f.url("/api/health")).send().unwrap().json().unwrap();
    assert_eq!(h.index.count, 5);

    // A wrong-dim snapshot is rejected and the old one stays live.
    let other = build_index(
        [("occ000".to_owned(), HashEmbedder::new(8, 0).embed_text("x").unwrap())],
        f.index.metadata().clone(),
    )
    .unwrap();
    common::save_index(&other, &f.index_path);
    let resp = client.post(f.url("/api/admin/reload")).send().unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let h: HealthResponse = client.get(f.url("/api/health")).send().unwrap().json().unwrap();
    assert_eq!(h.index.count, 5);
}

#[test]
fn startup_rejects_dim_mismatch_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::corpus(5);
    let index = common::job_index(&corpus, &HashEmbedder::new(256, 0));
    let err = AppState::new(
        index.clone(),
        dir.path().join("i"),
        corpus.occupations.clone(),
        Arc::new(HashEmbedder::new(64, 0)),
        Preprocessor::token_cutoff(),
        20,
        &dir.path().join("j.jsonl"),
    )
    .err()
    .unwrap();
    assert!(matches!(err, ServiceError::DimMismatch { index: 256, provider: 64 }));
    let err = AppState::new(
        index,
        dir.path().join("i"),
        corpus.occupations[1..].to_vec(),
        Arc::new(HashEmbedder::new(256, 0)),
        Preprocessor::token_cutoff(),
        20,
        &dir.path().join("j.jsonl"),
    )
    .err()
    .unwrap();
    assert!(matches!(err, ServiceError::UnknownOccupation(ref id) if id == "occ000"));
}
