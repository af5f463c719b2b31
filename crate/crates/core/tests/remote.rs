//! Conformance of the `/embed` and `/classify` clients against mock peers.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use occumatch::adfilter::{
    filter_relevant, segment_paragraphs, BaselineScorer, ClassifyRequest, ClassifyResponse, FilterError, FilterMode,
    Preprocessor, RelevanceFilter, RemoteClassifier, WhitespaceCounter,
};
use occumatch::embedding::{EmbedError, EmbedRequest, EmbedResponse, Embedder, HashEmbedder, ProviderSpec, RemoteEmbedder};
use occumatch::service::{router, spawn, AppState, RunningService};
use parking_lot::Mutex;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Good,
    DropOne,
    MixedDims,
    WrongDeclaredDim,
    ServerError,
    Garbage,
    OutOfRange,
}

struct Mock {
    mode: Mutex<Mode>,
    hash: HashEmbedder,
    calls: AtomicUsize,
}

impl Mock {
    fn set(&self, mode: Mode) {
        *self.mode.lock() = mode;
    }
}

async fn embed(State(m): State<Arc<Mock>>, Json(req): Json<EmbedRequest>) -> Response {
    m.calls.fetch_add(1, Ordering::SeqCst);
    let mode = *m.mode.lock();
    let mut vectors: Vec<Vec<f64>> = req
        .texts
        .iter()
        .map(|t| m.hash.embed_text(t).unwrap().into_inner())
        .collect();
    let mut dim = m.hash.dim();
    match mode {
        Mode::ServerError => return (StatusCode::INTERNAL_SERVER_ERROR, "model crashed").into_response(),
        Mode::Garbage => return (StatusCode::OK, "not json").into_response(),
        Mode::DropOne => {
            vectors.pop();
        }
        Mode::MixedDims => vectors.last_mut().unwrap().push(0.0),
        Mode::WrongDeclaredDim => dim += 1,
        _ => {}
    }
    Json(EmbedResponse {
        model: "mock-encoder".into(),
        dim,
        vectors,
    })
    .into_response()
}

async fn classify(State(m): State<Arc<Mock>>, Json(req): Json<ClassifyRequest>) -> Response {
    m.calls.fetch_add(1, Ordering::SeqCst);
    let paragraphs = segment_paragraphs("remote", &req.paragraphs.join("\n\n")).unwrap();
    let mut scores = BaselineScorer::default().score(&paragraphs).unwrap();
    match *m.mode.lock() {
        Mode::ServerError => return (StatusCode::SERVICE_UNAVAILABLE, "busy").into_response(),
        Mode::Garbage => return (StatusCode::OK, "{\"scores\":").into_response(),
        Mode::DropOne => {
            scores.pop();
        }
        Mode::OutOfRange => scores[0] = 1.5,
        _ => {}
    }
    let labels = scores.iter().map(|s| u8::from(*s >= 0.5)).collect();
    Json(ClassifyResponse { scores, labels }).into_response()
}

fn mock() -> (Arc<Mock>, RunningService) {
    let m = Arc::new(Mock {
        mode: Mutex::new(Mode::Good),
        hash: HashEmbedder::new(16, 7),
        calls: AtomicUsize::new(0),
    });
    let app = Router::new()
        .route("/embed", post(embed))
        .route("/classify", post(classify))
        .with_state(m.clone());
    (m, spawn(app, "127.0.0.1:0".parse().unwrap()).unwrap())
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("text number {i}")).collect()
}

#[test]
fn embed_round_trip_and_batching() {
    let (m, server) = mock();
    let remote = RemoteEmbedder::connect_with(&server.base_url(), 2, Duration::from_secs(5)).unwrap();
    assert_eq!(remote.info().model, "mock-encoder");
    assert_eq!(remote.info().dim, 16);
    let calls_after_probe = m.calls.load(Ordering::SeqCst);
    assert_eq!(calls_after_probe, 1);
    let got = remote.embed(&texts(5)).unwrap();
    assert_eq!(m.calls.load(Ordering::SeqCst) - calls_after_probe, 3);
    let want: Vec<_> = texts(5).iter().map(|t| m.hash.embed_text(t).unwrap()).collect();
    assert_eq!(got, want);
    // Trailing `/embed` in the configured URL is accepted.
    let again = RemoteEmbedder::connect(&format!("{}/embed", server.base_url())).unwrap();
    assert_eq!(again.embed(&texts(1)).unwrap(), want[..1]);
}

#[test]
fn embed_contract_violations() {
    let (m, server) = mock();
    let remote = RemoteEmbedder::connect(&server.base_url()).unwrap();

    m.set(Mode::DropOne);
    let e = remote.embed(&texts(3)).unwrap_err();
    assert!(matches!(e, EmbedError::CountMismatch { expected: 3, actual: 2, .. }), "{e}");
    assert!(e.is_protocol());

    m.set(Mode::MixedDims);
    let e = remote.embed(&texts(3)).unwrap_err();
    assert!(matches!(e, EmbedError::DimInconsistency { .. }), "{e}");
    assert!(e.to_string().contains("vector 2"));

    m.set(Mode::WrongDeclaredDim);
    assert!(matches!(remote.embed(&texts(2)), Err(EmbedError::DimInconsistency { .. })));

    m.set(Mode::ServerError);
    let e = remote.embed(&texts(1)).unwrap_err();
    assert!(matches!(e, EmbedError::Transport { .. }));
    assert!(e.to_string().contains("500"), "{e}");
    assert!(e.to_string().contains("/embed"), "{e}");

    m.set(Mode::Garbage);
    assert!(matches!(remote.embed(&texts(1)), Err(EmbedError::Transport { .. })));
}

#[test]
fn unreachable_provider() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let spec = ProviderSpec::parse(&format!("http://127.0.0.1:{port}"), 256, 0).unwrap();
    let e = spec.connect().err().unwrap();
    assert!(matches!(e, EmbedError::Transport { .. }));
    assert!(e.is_protocol());
}

#[test]
fn classifier_matches_local_baseline() {
    let (_m, server) = mock();
    let remote = RemoteClassifier::new(&server.base_url());
    let corpus = common::corpus(5);
    for ad in &corpus.ads[..6] {
        let paragraphs = segment_paragraphs(&ad.ad_id, &ad.body).unwrap();
        let local = BaselineScorer::default().score(&paragraphs).unwrap();
        assert_eq!(remote.score(&paragraphs).unwrap(), local);
        let a = filter_relevant(&paragraphs, &remote, 0.5, 512, &WhitespaceCounter).unwrap();
        let b = filter_relevant(&paragraphs, &BaselineScorer::default(), 0.5, 512, &WhitespaceCounter).unwrap();
        assert_eq!(a.text, b.text);
    }
}

#[test]
fn classifier_contract_violations() {
    let (m, server) = mock();
    let remote = RemoteClassifier::new(&server.base_url());
    let paragraphs = segment_paragraphs("ad", "Aufgaben: planen\n\nWir bieten Obst").unwrap();

    m.set(Mode::DropOne);
    assert!(matches!(remote.score(&paragraphs), Err(FilterError::Protocol(_))));
    m.set(Mode::OutOfRange);
    assert!(matches!(remote.score(&paragraphs), Err(FilterError::Protocol(ref s)) if s.contains("1.5")));
    m.set(Mode::Garbage);
    assert!(matches!(remote.score(&paragraphs), Err(FilterError::Protocol(_))));
    m.set(Mode::ServerError);
    let e = remote.score(&paragraphs).unwrap_err();
    assert!(matches!(e, FilterError::Transport { .. }));
    assert!(e.is_protocol());
    // No silent fallback to the token cut-off.
    assert!(filter_relevant(&paragraphs, &remote, 0.5, 512, &WhitespaceCounter).is_err());
}

#[test]
fn service_reports_provider_and_classifier_failures_as_502() {
    let (m, mock_server) = mock();
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::corpus(10);
    let embedder: Arc<dyn Embedder> = Arc::new(RemoteEmbedder::connect(&mock_server.base_url()).unwrap());
    let index = common::job_index(&corpus, embedder.as_ref());
    let pre = Preprocessor::new(
        FilterMode::Classifier,
        Arc::new(RemoteClassifier::new(&mock_server.base_url())),
    );
    let state = AppState::new(
        index,
        dir.path().join("i.cbidx.json"),
        corpus.occupations.clone(),
        embedder,
        pre,
        5,
        &dir.path().join("j.jsonl"),
    )
    .unwrap();
    let server = spawn(router(state.clone()), "127.0.0.1:0".parse().unwrap()).unwrap();
    let client = reqwest::blocking::Client::new();
    let url = format!("{}/api/recommend", server.base_url());
    let body = json!({"text": corpus.ads[0].body});

    let ok = client.post(&url).json(&body).send().unwrap();
    assert_eq!(ok.status(), 200);
    m.set(Mode::ServerError);
    let resp = client.post(&url).json(&body).send().unwrap();
    assert_eq!(resp.status(), 502);
    let err: serde_json::Value = resp.json().unwrap();
    assert!(err["error"].as_str().unwrap().contains("classify"), "{err}");
    m.set(Mode::DropOne);
    assert_eq!(client.post(&url).json(&body).send().unwrap().status(), 502);

    server.stop().unwrap();
    drop(state);
}
