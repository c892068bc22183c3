use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;
use tokio::sync::Semaphore;
use utube_core::io::ensembles_to_json;

use crate::query::{run_query, sample_ensembles, QueryError, RunOptions, TubeQuery};
use crate::registry::Registry;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Rayon workers per query.
    pub threads: usize,
    /// Queries computed at the same time; further requests wait.
    pub max_concurrent: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_concurrent: 2,
        }
    }
}

struct AppState {
    registry: Registry,
    config: ServiceConfig,
    permits: Semaphore,
}

pub fn router(registry: Registry, config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        permits: Semaphore::new(config.max_concurrent.max(1)),
        registry,
        config,
    });
    Router::new()
        .route("/health", get(health))
        .route("/models", get(models))
        .route("/query", post(query))
        .route("/ensemble", post(ensemble))
        .with_state(state)
}

/// Binds and serves until ctrl-c.
pub async fn serve(
    addr: SocketAddr,
    registry: Registry,
    config: ServiceConfig,
) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("failed to bind {addr}: {e}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(registry, config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

struct ApiError(QueryError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            QueryError::Invalid(_) => StatusCode::BAD_REQUEST,
            QueryError::NotFound(_) => StatusCode::NOT_FOUND,
            QueryError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "error": self.0.kind(), "detail": self.0.detail() });
        (status, axum::Json(body)).into_response()
    }
}

fn json_body(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn health() -> Response {
    let body = json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") });
    axum::Json(body).into_response()
}

async fn models(State(state): State<Arc<AppState>>) -> Response {
    axum::Json(json!({ "models": state.registry.describe() })).into_response()
}

fn parse(body: &[u8]) -> Result<TubeQuery, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError(QueryError::invalid(format!("malformed query: {e}"))))
}

/// Runs `work` on the blocking pool once a permit is free.
async fn compute<T: Send + 'static>(
    state: Arc<AppState>,
    work: impl FnOnce(&AppState) -> Result<T, QueryError> + Send + 'static,
) -> Result<T, ApiError> {
    let _permit = state
        .permits
        .acquire()
        .await
        .map_err(|_| ApiError(QueryError::Internal("service is shutting down".into())))?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || work(&st))
        .await
        .map_err(|e| ApiError(QueryError::Internal(format!("query task failed: {e}"))))?
        .map_err(ApiError)
}

async fn query(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let q = parse(&body)?;
    q.validate().map_err(ApiError)?;
    let text = compute(state, move |st| {
        let options = RunOptions {
            workers: st.config.threads,
            allow_palette_files: false,
        };
        let out = run_query(&st.registry, &q, options)?;
        out.document
            .to_json()
            .map_err(|e| QueryError::Internal(e.to_string()))
    })
    .await?;
    Ok(json_body(text))
}

async fn ensemble(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let q = parse(&body)?;
    q.validate().map_err(ApiError)?;
    let text = compute(state, move |st| {
        let es = sample_ensembles(&st.registry, &q, st.config.threads)?;
        ensembles_to_json(&es, true).map_err(|e| QueryError::Internal(e.to_string()))
    })
    .await?;
    Ok(json_body(text))
}
