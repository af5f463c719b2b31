//! HTTP API over an immutable index snapshot.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /api/recommend` | preprocess, embed and rank a resume text |
//! | `GET /api/jobs/{esco_id}` | occupation record from the corpus |
//! | `POST /api/judgments` | append one expert judgment to the durable log |
//! | `GET /api/metrics/{resume_id}?k=20` | MAP@K, P@K, MRR@K from majority votes |
//! | `GET /api/health` | index metadata and provider info |
//! | `POST /api/admin/reload` | reload the index file and swap it in atomically |
//!
//! Handlers share one [`AppState`]. Embedding and classification run on the
//! blocking pool because remote clients block. Judgments are appended by a
//! single writer and synced to disk before the request is acknowledged.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adfilter::{ClassifierSpec, FilterError, FilterMode, Preprocessor};
use crate::corpus::{parse_esco, EscoOccupation};
use crate::embedding::{EmbedError, Embedder, ProviderInfo, ProviderSpec, DEFAULT_DIM, DEFAULT_SEED};
use crate::evaluation::{evaluate_resume, read_judgments, write_judgment, EvalError, HumanEvalMetrics, Judgment, JudgmentSet};
use crate::matcher::{Index, IndexError, IndexMetadata, FORMAT_VERSION};

pub const MAX_K: usize = 100;
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const ENV_PREFIX: &str = "OCCUMATCH_";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("index `{path}`: {source}")]
    Index {
        path: PathBuf,
        #[source]
        source: IndexError,
    },
    #[error("occupations `{path}`: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: crate::corpus::CorpusError,
    },
    #[error("judgment log `{path}`: {source}")]
    Judgments {
        path: PathBuf,
        #[source]
        source: EvalError,
    },
    #[error("provider: {0}")]
    Provider(#[source] EmbedError),
    #[error("classifier: {0}")]
    Classifier(#[source] FilterError),
    #[error("index dim {index} does not match provider dim {provider}")]
    DimMismatch { index: usize, provider: usize },
    #[error("indexed occupation `{0}` is missing from the occupation corpus")]
    UnknownOccupation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn is_io_or_protocol(&self) -> bool {
        match self {
            ServiceError::Io(_) => true,
            ServiceError::Index { source, .. } => matches!(source, IndexError::Io(_)),
            ServiceError::Corpus { source, .. } => matches!(source, crate::corpus::CorpusError::Io(_)),
            ServiceError::Judgments { source, .. } => matches!(source, EvalError::Io(_)),
            ServiceError::Provider(e) => e.is_protocol(),
            ServiceError::Classifier(e) => e.is_protocol(),
            _ => false,
        }
    }
}

/// Settings from one layer (flags, environment or config file); unset
/// fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub index: Option<PathBuf>,
    pub occupations: Option<PathBuf>,
    pub provider: Option<String>,
    pub classifier: Option<String>,
    pub filter_mode: Option<String>,
    pub k_default: Option<usize>,
    pub judgments: Option<PathBuf>,
    pub listen: Option<String>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
}

impl PartialConfig {
    /// Reads `OCCUMATCH_INDEX`, `OCCUMATCH_OCCUPATIONS`, … through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let var = |name: &str| lookup(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        fn num<T: std::str::FromStr>(name: &str, v: Option<String>) -> Result<Option<T>, ServiceError> {
            v.map(|s| {
                s.parse()
                    .map_err(|_| ServiceError::Config(format!("{ENV_PREFIX}{name}: cannot parse `{s}`")))
            })
            .transpose()
        }
        Ok(Self {
            index: var("INDEX").map(PathBuf::from),
            occupations: var("OCCUPATIONS").map(PathBuf::from),
            provider: var("PROVIDER"),
            classifier: var("CLASSIFIER"),
            filter_mode: var("FILTER_MODE"),
            k_default: num("K_DEFAULT", var("K_DEFAULT"))?,
            judgments: var("JUDGMENTS").map(PathBuf::from),
            listen: var("LISTEN"),
            dim: num("DIM", var("DIM"))?,
            seed: num("SEED", var("SEED"))?,
            threshold: num("THRESHOLD", var("THRESHOLD"))?,
        })
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn or(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            index: self.index.or(lower.index),
            occupations: self.occupations.or(lower.occupations),
            provider: self.provider.or(lower.provider),
            classifier: self.classifier.or(lower.classifier),
            filter_mode: self.filter_mode.or(lower.filter_mode),
            k_default: self.k_default.or(lower.k_default),
            judgments: self.judgments.or(lower.judgments),
            listen: self.listen.or(lower.listen),
            dim: self.dim.or(lower.dim),
            seed: self.seed.or(lower.seed),
            threshold: self.threshold.or(lower.threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub index: PathBuf,
    pub occupations: PathBuf,
    pub provider: ProviderSpec,
    pub classifier: ClassifierSpec,
    pub filter_mode: FilterMode,
    pub threshold: f64,
    pub k_default: usize,
    pub judgments: PathBuf,
    pub listen: SocketAddr,
}

impl ServiceConfig {
    /// Resolves flags over environment over config file, then validates.
    pub fn resolve(flags: PartialConfig, env: PartialConfig, file: PartialConfig) -> Result<Self, ServiceError> {
        let c = flags.or(env).or(file);
        let required = |v: Option<PathBuf>, name: &str| v.ok_or_else(|| ServiceError::Config(format!("`{name}` is required")));
        let k_default = c.k_default.unwrap_or(20);
        if !(1..=MAX_K).contains(&k_default) {
            return Err(ServiceError::Config(format!("k_default must be in 1..={MAX_K}, got {k_default}")));
        }
        let threshold = c.threshold.unwrap_or(crate::adfilter::DEFAULT_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ServiceError::Config(format!("threshold {threshold} outside [0, 1]")));
        }
        let listen = c.listen.as_deref().unwrap_or(DEFAULT_LISTEN);
        Ok(Self {
            index: required(c.index, "index")?,
            occupations: required(c.occupations, "occupations")?,
            provider: ProviderSpec::parse(
                c.provider.as_deref().unwrap_or("builtin-hash"),
                c.dim.unwrap_or(DEFAULT_DIM),
                c.seed.unwrap_or(DEFAULT_SEED),
            )
            .map_err(ServiceError::Config)?,
            classifier: c
                .classifier
                .as_deref()
                .unwrap_or("baseline")
                .parse()
                .map_err(ServiceError::Config)?,
            filter_mode: c
                .filter_mode
                .as_deref()
                .unwrap_or("classifier")
                .parse()
                .map_err(ServiceError::Config)?,
            threshold,
            k_default,
            judgments: required(c.judgments, "judgments")?,
            listen: listen
                .parse()
                .map_err(|_| ServiceError::Config(format!("invalid listen address `{listen}`")))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeSession {
    pub resume_id: String,
    pub text: String,
    /// Served occupation ids in model rank order.
    pub served: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
}

struct JudgmentLog {
    path: PathBuf,
    file: File,
    set: JudgmentSet,
}

impl JudgmentLog {
    fn open(path: &Path) -> Result<Self, ServiceError> {
        let err = |source: EvalError| ServiceError::Judgments {
            path: path.to_owned(),
            source,
        };
        let existing = match File::open(path) {
            Ok(f) => read_judgments(BufReader::new(f)).map_err(err)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(err(EvalError::Io(e))),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| err(EvalError::Io(e)))?;
        Ok(Self {
            path: path.to_owned(),
            file,
            set: JudgmentSet::from_log(&existing),
        })
    }

    fn append(&mut self, j: &Judgment) -> std::io::Result<()> {
        let mut line = Vec::new();
        write_judgment(j, &mut line)?;
        std::io::Write::write_all(&mut self.file, &line)?;
        self.file.sync_data()?;
        self.set.record(j);
        Ok(())
    }
}

/// Everything the handlers share.
pub struct AppState {
    index: RwLock<Arc<Index>>,
    index_path: PathBuf,
    occupations: HashMap<String, EscoOccupation>,
    embedder: Arc<dyn Embedder>,
    provider: ProviderInfo,
    pre: Preprocessor,
    k_default: usize,
    sessions: RwLock<HashMap<String, Arc<Mutex<ResumeSession>>>>,
    judgments: Mutex<JudgmentLog>,
}

impl AppState {
    /// Loads the index, corpus and judgment log and probes the provider.
    pub fn from_config(config: &ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        let embedder = config.provider.connect().map_err(ServiceError::Provider)?;
        let filter = config.classifier.build(None).map_err(ServiceError::Classifier)?;
        let pre = Preprocessor::new(config.filter_mode, filter).with_threshold(config.threshold);
        let file = File::open(&config.occupations)?;
        let occupations = parse_esco(file).map_err(|source| ServiceError::Corpus {
            path: config.occupations.clone(),
            source,
        })?;
        let index = load_index(&config.index)?;
        Self::new(
            index,
            config.index.clone(),
            occupations,
            embedder,
            pre,
            config.k_default,
            &config.judgments,
        )
    }

    pub fn new(
        index: Index,
        index_path: PathBuf,
        occupations: Vec<EscoOccupation>,
        embedder: Arc<dyn Embedder>,
        pre: Preprocessor,
        k_default: usize,
        judgment_log: &Path,
    ) -> Result<Arc<Self>, ServiceError> {
        if !(1..=MAX_K).contains(&k_default) {
            return Err(ServiceError::Config(format!("k_default must be in 1..={MAX_K}, got {k_default}")));
        }
        let probe = embedder.embed_one("probe").map_err(ServiceError::Provider)?;
        let provider = embedder.info();
        if probe.dim() != index.dim() || provider.dim != index.dim() {
            return Err(ServiceError::DimMismatch {
                index: index.dim(),
                provider: probe.dim(),
            });
        }
        let occupations: HashMap<String, EscoOccupation> =
            occupations.into_iter().map(|o| (o.esco_id.clone(), o)).collect();
        if let Some(id) = index.ids().find(|id| !occupations.contains_key(*id)) {
            return Err(ServiceError::UnknownOccupation(id.to_owned()));
        }
        Ok(Arc::new(Self {
            index: RwLock::new(Arc::new(index)),
            index_path,
            occupations,
            embedder,
            provider,
            pre,
            k_default,
            sessions: RwLock::new(HashMap::new()),
            judgments: Mutex::new(JudgmentLog::open(judgment_log)?),
        }))
    }

    /// The current snapshot; requests keep it alive until they finish.
    pub fn snapshot(&self) -> Arc<Index> {
        self.index.read().clone()
    }

    /// Validates `index` against the provider and the corpus, then swaps it in.
    pub fn swap_index(&self, index: Index) -> Result<(), ServiceError> {
        if index.dim() != self.provider.dim {
            return Err(ServiceError::DimMismatch {
                index: index.dim(),
                provider: self.provider.dim,
            });
        }
        if let Some(id) = index.ids().find(|id| !self.occupations.contains_key(*id)) {
            return Err(ServiceError::UnknownOccupation(id.to_owned()));
        }
        *self.index.write() = Arc::new(index);
        Ok(())
    }

    pub fn session(&self, resume_id: &str) -> Option<ResumeSession> {
        self.sessions.read().get(resume_id).map(|s| s.lock().clone())
    }

    /// Judgments currently applied, read from memory (mirrors the log).
    pub fn judgment_set(&self) -> JudgmentSet {
        self.judgments.lock().set.clone()
    }

    pub fn judgment_log_path(&self) -> PathBuf {
        self.judgments.lock().path.clone()
    }
}

fn load_index(path: &Path) -> Result<Index, ServiceError> {
    let err = |source: IndexError| ServiceError::Index {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(|e| err(IndexError::Io(e)))?;
    Index::load(BufReader::new(file)).map_err(err)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, r.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendRequest {
    pub text: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub resume_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendedJob {
    pub esco_id: String,
    pub title: String,
    pub description: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub resume_id: String,
    pub recommendations: Vec<RecommendedJob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub status: String,
    pub judgment: Judgment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexInfo {
    pub format_version: u32,
    pub dim: usize,
    pub count: usize,
    pub metadata: IndexMetadata,
}

impl IndexInfo {
    fn of(index: &Index) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            dim: index.dim(),
            count: index.len(),
            metadata: index.metadata().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub index: IndexInfo,
    pub provider: ProviderInfo,
    pub filter_mode: FilterMode,
}

#[derive(Debug, Deserialize)]
struct MetricsQuery {
    k: Option<usize>,
}

fn check_k(k: usize) -> Result<usize, ApiError> {
    if (1..=MAX_K).contains(&k) {
        Ok(k)
    } else {
        Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("k must be in 1..={MAX_K}, got {k}"),
        ))
    }
}

fn embed_error(e: EmbedError) -> ApiError {
    match e {
        EmbedError::NoTokens | EmbedError::Cancelled => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
        e if e.is_protocol() => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
        e => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn recommend(
    State(state): State<Arc<AppState>>,
    body: Result<Json<RecommendRequest>, JsonRejection>,
) -> ApiResult<RecommendResponse> {
    let Json(req) = body?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "text must be non-empty"));
    }
    let k = check_k(req.k.unwrap_or(state.k_default))?;
    if let Some(id) = &req.resume_id {
        if !state.sessions.read().contains_key(id) {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown resume session `{id}`")));
        }
    }

    let worker = state.clone();
    let text = req.text.clone();
    let vector = tokio::task::spawn_blocking(move || {
        let cleaned = worker.pre.apply("resume", &text).map_err(|e| match e {
            FilterError::EmptyBody => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
            e if e.is_protocol() => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
            e => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        })?;
        worker.embedder.embed_one(&cleaned).map_err(embed_error)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;

    let snapshot = state.snapshot();
    let recs = snapshot.recommend(&vector, k).map_err(|e| match e {
        IndexError::Query(EmbedError::DimMismatch { .. }) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        e => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
    })?;
    let recommendations: Vec<RecommendedJob> = recs
        .into_iter()
        .map(|r| {
            let occ = &state.occupations[&r.esco_id];
            RecommendedJob {
                title: occ.title.clone(),
                description: occ.description.clone(),
                esco_id: r.esco_id,
                score: r.score,
                rank: r.rank,
            }
        })
        .collect();

    let served: Vec<String> = recommendations.iter().map(|r| r.esco_id.clone()).collect();
    let now = chrono::Utc::now().to_rfc3339();
    let resume_id = match req.resume_id {
        Some(id) => {
            let session = state.sessions.read().get(&id).cloned();
            let session = session.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown resume session `{id}`")))?;
            let mut s = session.lock();
            s.text = req.text;
            s.served = served;
            s.updated_at = now;
            id
        }
        None => {
            let id = uuid::Uuid::new_v4().to_string();
            let session = ResumeSession {
                resume_id: id.clone(),
                text: req.text,
                served,
                created_at: now.clone(),
                updated_at: now,
            };
            state.sessions.write().insert(id.clone(), Arc::new(Mutex::new(session)));
            id
        }
    };
    Ok(Json(RecommendResponse {
        resume_id,
        recommendations,
    }))
}

async fn job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<EscoOccupation> {
    state
        .occupations
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown occupation `{id}`")))
}

async fn judge(
    State(state): State<Arc<AppState>>,
    body: Result<Json<Judgment>, JsonRejection>,
) -> ApiResult<JudgmentAck> {
    let Json(j) = body?;
    for (key, v) in [("resume_id", &j.resume_id), ("esco_id", &j.esco_id), ("expert_id", &j.expert_id)] {
        if v.trim().is_empty() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{key} must be non-empty")));
        }
    }
    let served = state
        .session(&j.resume_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown resume session `{}`", j.resume_id)))?
        .served;
    if !served.contains(&j.esco_id) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("`{}` was not served for resume `{}`", j.esco_id, j.resume_id),
        ));
    }
    let worker = state.clone();
    let stored = j.clone();
    tokio::task::spawn_blocking(move || worker.judgments.lock().append(&stored))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("judgment log: {e}")))?;
    Ok(Json(JudgmentAck {
        status: "stored".into(),
        judgment: j,
    }))
}

async fn metrics(
    State(state): State<Arc<AppState>>,
    UrlPath(resume_id): UrlPath<String>,
    Query(q): Query<MetricsQuery>,
) -> ApiResult<HumanEvalMetrics> {
    let k = check_k(q.k.unwrap_or(state.k_default))?;
    let session = state
        .session(&resume_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown resume session `{resume_id}`")))?;
    let judgments = state.judgments.lock();
    match evaluate_resume(&session.served, &judgments.set, &resume_id, k) {
        Ok(m) => Ok(Json(m)),
        Err(e @ EvalError::NoJudgments(_)) => Err(ApiError::new(StatusCode::CONFLICT, e.to_string())),
        Err(e) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        index: IndexInfo::of(&state.snapshot()),
        provider: state.provider.clone(),
        filter_mode: state.pre.mode,
    })
}

async fn reload(State(state): State<Arc<AppState>>) -> ApiResult<IndexInfo> {
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let index = load_index(&worker.index_path)?;
        let info = IndexInfo::of(&index);
        worker.swap_index(index)?;
        Ok::<_, ServiceError>(info)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map(Json)
    .map_err(|e| match e {
        ServiceError::DimMismatch { .. } | ServiceError::UnknownOccupation(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
        }
        e => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/recommend", post(recommend))
        .route("/api/jobs/:esco_id", get(job))
        .route("/api/judgments", post(judge))
        .route("/api/metrics/:resume_id", get(metrics))
        .route("/api/health", get(health))
        .route("/api/admin/reload", post(reload))
        .with_state(state)
}

/// A server running on its own runtime thread.
pub struct RunningService {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl RunningService {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown_and_join()
    }

    fn shutdown_and_join(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("service thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        let _ = self.shutdown_and_join();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves `app` on a
/// background thread until [`RunningService::stop`] or drop.
pub fn spawn(app: Router, addr: SocketAddr) -> std::io::Result<RunningService> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener)?;
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    });
    Ok(RunningService {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Serves until Ctrl-C.
pub fn run(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let app = router(state.clone());
    let result = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    drop(rt);
    drop(state);
    result
}
