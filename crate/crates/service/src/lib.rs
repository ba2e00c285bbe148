//! HTTP front end for the contract pipeline.
//!
//! Raw formats travel as raw bodies (TSV, COML, CNL text, UPPAAL XML);
//! queries use a JSON envelope `{coml, query, horizon?}`. Every error is a
//! JSON object `{code, message, location}`.

pub mod ops;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use norma_core::checker::DEFAULT_STATE_LIMIT;
use serde::de::DeserializeOwned;
use tokio::sync::Semaphore;

use crate::ops::{ApiError, CompletionRequest, QueryRequest};
use crate::store::Store;

pub const TSV: &str = "text/tab-separated-values; charset=utf-8";
pub const XML: &str = "application/xml; charset=utf-8";
pub const TEXT: &str = "text/plain; charset=utf-8";
pub const JSON: &str = "application/json";

#[derive(Debug, Clone)]
pub struct Config {
    pub store: PathBuf,
    pub state_limit: usize,
    /// Concurrent model-checking runs.
    pub workers: usize,
}

impl Config {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        Config { store: store.into(), state_limit: DEFAULT_STATE_LIMIT, workers }
    }
}

struct AppState {
    store: Store,
    checks: Semaphore,
    state_limit: usize,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, [(header::CONTENT_TYPE, JSON)], self.to_json()).into_response()
    }
}

type Reply = Result<Response, ApiError>;

fn ok(content_type: &'static str, body: String) -> Reply {
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

fn text(body: Bytes) -> Result<String, ApiError> {
    String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("BAD_ENCODING", "request body is not UTF-8"))
}

fn json<T: DeserializeOwned>(body: Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("BAD_REQUEST", e.to_string()))
}

/// Header-safe rendering of the missing words: comma separated, anything
/// outside printable ASCII escaped as `\u{..}`.
pub fn misses_header(misses: &[String]) -> String {
    misses
        .join(",")
        .chars()
        .map(|c| if c.is_ascii_graphic() || c == ' ' { c.to_string() } else { format!("\\u{{{:x}}}", c as u32) })
        .collect()
}

async fn nl_tsv(body: Bytes) -> Reply {
    ok(TSV, ops::nl_to_tsv(&text(body)?)?)
}

async fn tsv_coml(body: Bytes) -> Reply {
    ok(XML, ops::tsv_to_coml(&text(body)?)?)
}

async fn coml_codsh(body: Bytes) -> Reply {
    ok(TEXT, ops::coml_to_codsh(&text(body)?)?)
}

async fn coml_cnl(body: Bytes) -> Reply {
    let (cnl, misses) = ops::coml_to_cnl(&text(body)?)?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(TEXT));
    if !misses.is_empty() {
        headers.insert("x-lexicon-misses", HeaderValue::from_str(&misses_header(&misses)).expect("escaped to ASCII"));
    }
    Ok((headers, cnl).into_response())
}

async fn coml_uppaal(body: Bytes) -> Reply {
    ok(XML, ops::coml_to_uppaal(&text(body)?)?)
}

async fn coml_syntactic(body: Bytes) -> Reply {
    let req: QueryRequest = json(body)?;
    ok(JSON, ops::syntactic(&req.coml, &req.query)?)
}

async fn coml_semantic(State(app): State<Arc<AppState>>, body: Bytes) -> Reply {
    let req: QueryRequest = json(body)?;
    let _permit = app.checks.acquire().await.map_err(|_| ApiError::new(503, "UNAVAILABLE", "shutting down"))?;
    let limit = app.state_limit;
    let out = tokio::task::spawn_blocking(move || ops::semantic(&req.coml, &req.query, req.horizon, limit))
        .await
        .map_err(|e| ApiError::new(500, "INTERNAL", e.to_string()))??;
    ok(JSON, out)
}

async fn coml_completions(body: Bytes) -> Reply {
    let req: CompletionRequest = json(body)?;
    ok(JSON, ops::completions(&req.coml, req.template)?)
}

async fn templates() -> Reply {
    ok(JSON, ops::templates())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::new(500, "INTERNAL", e.to_string()))?
}

async fn put_model(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let coml = text(body)?;
    let (info, created) = blocking(move || app.store.put(&id, &coml)).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, [(header::CONTENT_TYPE, JSON)], serde_json::to_string(&info).expect("plain struct")).into_response())
}

async fn get_model(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Reply {
    ok(XML, blocking(move || app.store.get(&id)).await?)
}

async fn list_models(State(app): State<Arc<AppState>>) -> Reply {
    let list = blocking(move || app.store.list()).await?;
    ok(JSON, serde_json::to_string(&list).expect("plain struct"))
}

async fn not_found() -> ApiError {
    ApiError::new(404, "NOT_FOUND", "no such endpoint")
}

pub fn router(config: &Config) -> std::io::Result<Router> {
    let state = Arc::new(AppState {
        store: Store::open(&config.store)?,
        checks: Semaphore::new(config.workers.max(1)),
        state_limit: config.state_limit,
    });
    Ok(Router::new()
        .route("/nl/tsv", post(nl_tsv))
        .route("/tsv/coml", post(tsv_coml))
        .route("/coml/codsh", post(coml_codsh))
        .route("/coml/cnl", post(coml_cnl))
        .route("/coml/uppaal", post(coml_uppaal))
        .route("/coml/syntactic", post(coml_syntactic))
        .route("/coml/semantic", post(coml_semantic))
        .route("/coml/completions", post(coml_completions))
        .route("/templates", get(templates))
        .route("/models", get(list_models))
        .route("/models/{id}", get(get_model).put(put_model))
        .fallback(not_found)
        .with_state(state))
}

pub async fn serve(addr: SocketAddr, config: Config) -> std::io::Result<()> {
    let app = router(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}
