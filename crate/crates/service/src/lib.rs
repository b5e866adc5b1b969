//! HTTP API for the reading interface, versioned under `/v1`.

mod error;
mod jobs;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use cnr_core::filter::{filter_tagged, FilterError, FilterQuery, TaggedComment};
use cnr_core::ingest::{parse_document, IngestError};
use cnr_core::model::{Article, ProcessedArticle};
use cnr_core::pipeline::{JobState, JobStatus, Pipeline, ProducedAt, Progress};
use cnr_core::store::{Store, StoreError};
use serde::Serialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
use jobs::{Claim, JobBoard};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Allowed UI origin; any origin when unset.
    pub cors_origin: Option<String>,
    /// Built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    pub produced_at: ProducedAt,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cors_origin: None,
            static_dir: None,
            produced_at: ProducedAt::Now,
        }
    }
}

struct AppState {
    store: Arc<Store>,
    pipeline: Arc<Pipeline>,
    jobs: JobBoard,
    produced_at: ProducedAt,
    runs: AtomicU64,
}

type Shared = Arc<AppState>;

pub fn router(store: Arc<Store>, pipeline: Arc<Pipeline>, config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        store,
        pipeline,
        jobs: JobBoard::default(),
        produced_at: config.produced_at,
        runs: AtomicU64::new(0),
    });
    let origin = match config.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(v)) => AllowOrigin::exact(v),
        Some(Err(_)) => {
            tracing::warn!("invalid CORS origin ignored; allowing any origin");
            AllowOrigin::any()
        }
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);

    let api = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/articles", get(list_articles).post(create_article))
        .route("/v1/articles/{id}", get(get_article))
        .route("/v1/articles/{id}/status", get(get_status))
        .route("/v1/articles/{id}/process", post(process_article))
        .route("/v1/articles/{id}/main-points", get(main_points))
        .route("/v1/articles/{id}/comments", get(comments))
        .route("/v1/articles/{id}/hints", get(hints))
        .with_state(state);
    let app = match config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

impl AppState {
    fn article(&self, id: &str) -> Result<Article, ApiError> {
        match self.store.article(id) {
            Ok(Some(a)) => Ok(a),
            Ok(None) => Err(ApiError::not_found(id)),
            Err(e) => Err(ApiError::internal(e)),
        }
    }

    /// Board entry if any, else Done when output is on disk, else Pending.
    fn status(&self, article: &Article) -> Result<JobStatus, ApiError> {
        if let Some(s) = self.jobs.get(&article.id) {
            return Ok(s);
        }
        let total = article.first_level().count();
        let on_disk = self
            .store
            .processed(&article.id)
            .map_err(ApiError::internal)?
            .is_some();
        Ok(JobStatus {
            article_id: article.id.clone(),
            state: if on_disk {
                JobState::Done
            } else {
                JobState::Pending
            },
            progress: Progress {
                processed: if on_disk { total } else { 0 },
                total,
            },
        })
    }

    /// The processed output, or 409 when the job is not Done.
    fn processed(&self, article: &Article) -> Result<ProcessedArticle, ApiError> {
        let status = self.status(article)?;
        if status.state != JobState::Done {
            return Err(ApiError::not_ready(&article.id, state_name(&status.state)));
        }
        self.store
            .processed(&article.id)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError::internal(format!("output for {:?} missing", article.id)))
    }
}

fn state_name(state: &JobState) -> &'static str {
    match state {
        JobState::Pending => "pending",
        JobState::Classifying => "classifying",
        JobState::Summarizing => "summarizing",
        JobState::Reflecting => "reflecting",
        JobState::Done => "done",
        JobState::Failed { .. } => "failed",
    }
}

async fn health(State(state): State<Shared>) -> impl IntoResponse {
    Json(json!({
        "status": "ok",
        "pipeline_version": state.pipeline.version(),
        "pipeline_runs": state.runs.load(Ordering::SeqCst),
    }))
}

#[derive(Serialize)]
struct ArticleSummary {
    id: String,
    author: String,
    created_at: String,
    state: &'static str,
}

async fn list_articles(State(state): State<Shared>) -> Result<impl IntoResponse, ApiError> {
    let mut out = Vec::new();
    for id in state.store.article_ids().map_err(ApiError::internal)? {
        let article = state.article(&id)?;
        let status = state.status(&article)?;
        out.push(ArticleSummary {
            id,
            author: article.author,
            created_at: cnr_core::model::timestamp::format(&article.created_at),
            state: state_name(&status.state),
        });
    }
    Ok(Json(json!({ "articles": out })))
}

async fn create_article(
    State(state): State<Shared>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let raw = std::str::from_utf8(&body)
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", "body is not UTF-8"))?;
    let doc = parse_document(raw).map_err(|e| match e {
        IngestError::Validation(v) => {
            ApiError::new(StatusCode::BAD_REQUEST, "validation", v.to_string())
        }
        other => ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", other.to_string()),
    })?;
    match state.store.insert_article(&doc) {
        Ok(()) => {
            tracing::info!(article = %doc.article.id, "article stored");
            Ok((StatusCode::CREATED, Json(json!({ "id": doc.article.id }))))
        }
        Err(StoreError::AlreadyExists(id)) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "already_exists",
            format!("article {id:?} already stored"),
        )),
        Err(StoreError::Validation(v)) => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "validation",
            v.to_string(),
        )),
        Err(e) => Err(ApiError::internal(e)),
    }
}

async fn get_article(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let article = state.article(&id)?;
    let job = state.status(&article)?;
    Ok(Json(json!({
        "article": {
            "id": article.id,
            "author": article.author,
            "text": article.text,
            "created_at": cnr_core::model::timestamp::format(&article.created_at),
            "metrics": article.metrics,
            "comment_count": article.comments.len(),
            "first_level_count": article.first_level().count(),
        },
        "job": job,
    })))
}

async fn get_status(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let article = state.article(&id)?;
    Ok(Json(state.status(&article)?))
}

async fn process_article(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<impl IntoResponse, ApiError> {
    let article = state.article(&id)?;
    let rerun = flag(&params, "rerun")?;
    let baseline = state.status(&article)?;
    let total = baseline.progress.total;
    let status = match state.jobs.claim(&id, total, baseline, rerun) {
        Claim::Existing(s) => s,
        Claim::Started(s) => {
            state.runs.fetch_add(1, Ordering::SeqCst);
            let worker = state.clone();
            tokio::task::spawn_blocking(move || run_job(&worker, &article));
            s
        }
    };
    Ok((StatusCode::ACCEPTED, Json(status)))
}

fn run_job(state: &AppState, article: &Article) {
    let id = &article.id;
    let observe = |s: JobState, p: Progress| {
        // Done is only reported once the output is on disk
        if s != JobState::Done {
            state.jobs.advance(id, s, p);
        }
    };
    let produced_at = state.produced_at.resolve(article);
    let outcome = state
        .pipeline
        .process(article, produced_at, &observe)
        .map_err(|e| e.to_string())
        .and_then(|pa| state.store.put_processed(&pa).map_err(|e| e.to_string()));
    match outcome {
        Ok(()) => {
            tracing::info!(article = %id, "processing done");
            state.jobs.finish(id, JobState::Done);
        }
        Err(reason) => {
            tracing::warn!(article = %id, %reason, "processing failed");
            state.jobs.finish(id, JobState::Failed { reason });
        }
    }
}

async fn main_points(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let article = state.article(&id)?;
    let pa = state.processed(&article)?;
    Ok(Json(
        json!({ "article_id": id, "main_points": pa.main_points }),
    ))
}

async fn hints(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let article = state.article(&id)?;
    let pa = state.processed(&article)?;
    Ok(Json(json!({ "article_id": id, "hints": pa.hints })))
}

async fn comments(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<impl IntoResponse, ApiError> {
    let article = state.article(&id)?;
    if flag(&params, "raw")? {
        return Ok(Json(
            json!({ "article_id": id, "comments": article.comments }),
        ));
    }
    let query = FilterQuery::from_params(
        params.get("content").map(String::as_str),
        params.get("sentiment").map(String::as_str),
        params.get("point").map(String::as_str),
    )
    .map_err(unprocessable)?;
    let pa = state.processed(&article)?;
    let tagged: Vec<TaggedComment> = filter_tagged(&pa, &article, &query)
        .map_err(unprocessable)?
        .into_iter()
        .map(|(c, t)| TaggedComment {
            comment: c.clone(),
            categories: t.categories.clone(),
            sentiment: t.sentiment,
        })
        .collect();
    Ok(Json(json!({ "article_id": id, "comments": tagged })))
}

fn unprocessable(e: FilterError) -> ApiError {
    ApiError::new(
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid_query",
        e.to_string(),
    )
}

fn flag(params: &HashMap<String, String>, name: &str) -> Result<bool, ApiError> {
    match params.get(name).map(String::as_str) {
        None | Some("0") | Some("false") => Ok(false),
        Some("") | Some("1") | Some("true") => Ok(true),
        Some(other) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_query",
            format!("{name} must be 0 or 1, got {other:?}"),
        )),
    }
}
