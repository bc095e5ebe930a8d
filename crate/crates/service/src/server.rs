//! HTTP/JSON service.
//!
//! Reads are served from an immutable [`Snapshot`] of the model bundle.
//! Relabel and retrain requests go through one mutation lock, so they apply
//! in a total order; a finished retrain replaces the snapshot atomically and
//! bumps its generation. Every response that depends on the bundle carries
//! the generation it was computed from.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use corpusmap::classifier::top_weights;
use corpusmap::curation::{apply_verdicts, find_outliers, MovementSummary, OutlierParams, OutlierReport, RelabelVerdict, VerdictLog};
use corpusmap::{Corpus, Document, ModelBundle, PredictMode, Prediction};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ServiceError;

/// One immutable model bundle and its generation number.
#[derive(Debug)]
pub struct Snapshot {
    pub generation: u64,
    pub bundle: ModelBundle,
}

#[derive(Clone, Debug)]
pub struct ServiceOptions {
    /// Defaults for outlier runs; `k` is overridable per request.
    pub outliers: OutlierParams,
    pub verdict_log: Option<VerdictLog>,
    /// Where retrained bundles are written before they go live.
    pub save_model: Option<PathBuf>,
    pub actor: String,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            outliers: OutlierParams::default(),
            verdict_log: None,
            save_model: None,
            actor: "service".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done { generation: u64 },
    Failed { kind: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    pub category: String,
    #[serde(flatten)]
    pub state: JobState,
}

pub struct ServiceState {
    snapshot: RwLock<Arc<Snapshot>>,
    corpus: tokio::sync::Mutex<Arc<Corpus>>,
    jobs: Mutex<BTreeMap<u64, JobStatus>>,
    next_job: AtomicU64,
    options: ServiceOptions,
}

impl ServiceState {
    pub fn new(bundle: ModelBundle, corpus: Corpus, options: ServiceOptions) -> Arc<Self> {
        Arc::new(ServiceState {
            snapshot: RwLock::new(Arc::new(Snapshot { generation: 0, bundle })),
            corpus: tokio::sync::Mutex::new(Arc::new(corpus)),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
            options,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock poisoned"))
    }

    pub async fn corpus(&self) -> Arc<Corpus> {
        Arc::clone(&*self.corpus.lock().await)
    }

    pub fn job(&self, id: u64) -> Option<JobStatus> {
        self.jobs.lock().expect("job table poisoned").get(&id).cloned()
    }

    fn set_job(&self, id: u64, state: JobState) {
        if let Some(job) = self.jobs.lock().expect("job table poisoned").get_mut(&id) {
            job.state = state;
        }
    }

    /// Queues a retrain of `category` and returns its job id. The job waits
    /// for earlier mutations, trains off the request path, then swaps the
    /// snapshot.
    pub fn start_retrain(self: &Arc<Self>, category: String) -> u64 {
        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        self.jobs.lock().expect("job table poisoned").insert(
            id,
            JobStatus {
                id,
                category: category.clone(),
                state: JobState::Queued,
            },
        );
        let state = Arc::clone(self);
        tokio::spawn(async move {
            let guard = state.corpus.lock().await;
            state.set_job(id, JobState::Running);
            let corpus = Arc::clone(&*guard);
            let current = state.snapshot();
            let save = state.options.save_model.clone();
            let built = tokio::task::spawn_blocking(move || -> crate::Result<ModelBundle> {
                let bundle = current.bundle.retrain_category(&corpus, &category)?;
                if let Some(path) = save {
                    bundle.save(path)?;
                }
                Ok(bundle)
            })
            .await;
            let outcome = match built {
                Ok(Ok(bundle)) => {
                    let mut slot = state.snapshot.write().expect("snapshot lock poisoned");
                    let generation = slot.generation + 1;
                    *slot = Arc::new(Snapshot { generation, bundle });
                    JobState::Done { generation }
                }
                Ok(Err(e)) => JobState::Failed {
                    kind: e.kind().into(),
                    message: e.to_string(),
                },
                Err(e) => JobState::Failed {
                    kind: "internal".into(),
                    message: e.to_string(),
                },
            };
            state.set_job(id, outcome);
            drop(guard);
        });
        id
    }
}

/// Error body: `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            kind: "invalid_input".into(),
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let kind = e.kind();
        let status = match kind {
            "unknown_category" => StatusCode::NOT_FOUND,
            "category_too_small" => StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_input" | "invalid_argument" | "unknown_document" | "contradictory_verdicts" | "corpus" => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

impl From<corpusmap::Error> for ApiError {
    fn from(e: corpusmap::Error) -> Self {
        ServiceError::from(e).into()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub authors: Vec<String>,
    /// `calibrated` (default) or `raw`.
    #[serde(default)]
    pub mode: Option<PredictMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category: String,
    pub f: f64,
    pub p: f64,
    pub label: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub generation: u64,
    pub results: Vec<CategoryResult>,
}

/// Formats bundle predictions the way the classify endpoint returns them.
pub fn classify_results(predictions: BTreeMap<String, Prediction>) -> Vec<CategoryResult> {
    predictions
        .into_iter()
        .map(|(category, p)| CategoryResult {
            category,
            f: p.f,
            p: p.p,
            label: p.label,
        })
        .collect()
}

async fn classify(State(state): State<Arc<ServiceState>>, body: Result<Json<ClassifyRequest>, JsonRejection>) -> ApiResult<ClassifyResponse> {
    let Json(req) = body?;
    if req.title.trim().is_empty() && req.abstract_text.trim().is_empty() && req.authors.is_empty() {
        return Err(ApiError::bad_request("document has no title, abstract or authors"));
    }
    let snap = state.snapshot();
    let doc = Document::new("request", req.title, req.abstract_text).with_authors(req.authors);
    let predictions = snap.bundle.predict(&doc, req.mode.unwrap_or(PredictMode::Calibrated));
    Ok(Json(ClassifyResponse {
        generation: snap.generation,
        results: classify_results(predictions),
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub category: String,
    pub positives: usize,
    pub trained_on: usize,
    pub c: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CategoriesResponse {
    pub generation: u64,
    pub lexicon_size: usize,
    pub categories: Vec<CategoryInfo>,
    pub skipped: Vec<corpusmap::classifier::SkippedCategory>,
}

async fn categories(State(state): State<Arc<ServiceState>>) -> Json<CategoriesResponse> {
    let snap = state.snapshot();
    let b = &snap.bundle;
    Json(CategoriesResponse {
        generation: snap.generation,
        lexicon_size: b.lexicon().len(),
        categories: b
            .models
            .values()
            .map(|m| CategoryInfo {
                category: m.category.clone(),
                positives: m.positives,
                trained_on: m.trained_on,
                c: m.c,
                converged: m.converged,
            })
            .collect(),
        skipped: b.skipped.clone(),
    })
}

#[derive(Debug, Deserialize)]
struct CategoryQuery {
    category: String,
    k: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutliersResponse {
    pub generation: u64,
    #[serde(flatten)]
    pub report: OutlierReport,
}

async fn outliers(State(state): State<Arc<ServiceState>>, query: Result<Query<CategoryQuery>, QueryRejection>) -> ApiResult<OutliersResponse> {
    let Query(q) = query?;
    let mut params = state.options.outliers;
    params.k = q.k.unwrap_or(params.k);
    let snap = state.snapshot();
    let corpus = state.corpus().await;
    let generation = snap.generation;
    let report = tokio::task::spawn_blocking(move || find_outliers(&corpus, &snap.bundle.featurizer, &q.category, &params))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal".into(),
            message: e.to_string(),
        })??;
    Ok(Json(OutliersResponse { generation, report }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelabelRequest {
    pub category: String,
    pub verdicts: Vec<RelabelVerdict>,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelabelResponse {
    pub category: String,
    #[serde(flatten)]
    pub summary: MovementSummary,
}

async fn relabel(State(state): State<Arc<ServiceState>>, body: Result<Json<RelabelRequest>, JsonRejection>) -> ApiResult<RelabelResponse> {
    let Json(req) = body?;
    if req.verdicts.is_empty() {
        return Err(ApiError::bad_request("no verdicts"));
    }
    let mut guard = state.corpus.lock().await;
    let (next, summary) = apply_verdicts(&guard, &req.verdicts, &req.category)?;
    if let Some(log) = &state.options.verdict_log {
        let actor = req.actor.as_deref().unwrap_or(&state.options.actor);
        log.append(&req.category, &req.verdicts, actor)?;
    }
    *guard = Arc::new(next);
    Ok(Json(RelabelResponse {
        category: req.category,
        summary,
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrainRequest {
    pub category: String,
}

async fn retrain(State(state): State<Arc<ServiceState>>, body: Result<Json<RetrainRequest>, JsonRejection>) -> Result<(StatusCode, Json<JobStatus>), ApiError> {
    let Json(req) = body?;
    if req.category.trim().is_empty() {
        return Err(ApiError::bad_request("category is empty"));
    }
    let id = state.start_retrain(req.category);
    let status = state.job(id).expect("job was just inserted");
    Ok((StatusCode::ACCEPTED, Json(status)))
}

async fn retrain_status(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> ApiResult<JobStatus> {
    let job = id.parse().ok().and_then(|id| state.job(id));
    job.map(Json).ok_or_else(|| ApiError {
        status: StatusCode::NOT_FOUND,
        kind: "unknown_job".into(),
        message: format!("no retrain job {id:?}"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightsResponse {
    pub generation: u64,
    pub category: String,
    pub positive: Vec<WeightedTerm>,
    pub negative: Vec<WeightedTerm>,
}

async fn weights(State(state): State<Arc<ServiceState>>, query: Result<Query<CategoryQuery>, QueryRejection>) -> ApiResult<WeightsResponse> {
    let Query(q) = query?;
    let snap = state.snapshot();
    let model = snap.bundle.model(&q.category)?;
    let top = top_weights(model, snap.bundle.lexicon(), q.k.unwrap_or(20))?;
    let named = |v: Vec<(corpusmap::Token, f64)>| {
        v.into_iter()
            .map(|(t, weight)| WeightedTerm {
                term: t.into_string(),
                weight,
            })
            .collect()
    };
    Ok(Json(WeightsResponse {
        generation: snap.generation,
        category: q.category,
        positive: named(top.positive),
        negative: named(top.negative),
    }))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/classify", post(classify))
        .route("/v1/categories", get(categories))
        .route("/v1/outliers", get(outliers))
        .route("/v1/relabel", post(relabel))
        .route("/v1/retrain", post(retrain))
        .route("/v1/retrain/{id}", get(retrain_status))
        .route("/v1/weights", get(weights))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<ServiceState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
