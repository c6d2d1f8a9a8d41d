use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use presence_core::config::EngineConfig;
use presence_core::engine::Snapshot;
use presence_core::store::Store;
use presence_core::wire::{handle, Endpoint, ErrorBody, WireQuery};
use presence_core::{Error, Result};
use serde::Serialize;

/// Shared service state. Queries clone the current snapshot handle and never
/// block a reload; a reload swaps in a fully built snapshot.
pub struct AppState {
    store_root: PathBuf,
    config: EngineConfig,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl AppState {
    pub fn new(store_root: PathBuf, config: EngineConfig, snapshot: Snapshot) -> Self {
        AppState { store_root, config, snapshot: RwLock::new(Arc::new(snapshot)) }
    }

    pub fn load(store_root: PathBuf, config: EngineConfig) -> Result<Self> {
        let snapshot = Snapshot::load(&Store::open(&store_root)?, config.clone())?;
        Ok(Self::new(store_root, config, snapshot))
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn swap(&self, next: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::InvalidInput(_)
        | Error::Parse { .. }
        | Error::SchemaMismatch(_)
        | Error::Unsorted(_)
        | Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(e: &Error) -> Response {
    json_response(status_for(e), ErrorBody::from(e).to_json())
}

async fn answer(state: Arc<AppState>, endpoint: Endpoint, body: Bytes) -> Response {
    let query: WireQuery = match serde_json::from_slice(&body) {
        Ok(q) => q,
        Err(e) => return error_response(&Error::InvalidInput(format!("malformed query: {e}"))),
    };
    let snapshot = state.current();
    let out = tokio::task::spawn_blocking(move || handle(&snapshot, endpoint, &query)).await;
    match out {
        Ok(Ok(resp)) => json_response(StatusCode::OK, resp.to_json()),
        Ok(Err(e)) => error_response(&e),
        Err(join) => error_response(&Error::InvalidInput(format!("query task failed: {join}"))),
    }
}

#[derive(Serialize)]
struct ReloadResponse {
    reloaded: bool,
    users: Vec<String>,
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    let s = state.clone();
    let built = tokio::task::spawn_blocking(move || {
        Snapshot::load(&Store::open(&s.store_root)?, s.config.clone())
    })
    .await;
    match built {
        Ok(Ok(next)) => {
            let users = next.users().into_iter().map(String::from).collect();
            state.swap(next);
            let body = ReloadResponse { reloaded: true, users };
            json_response(StatusCode::OK, serde_json::to_string(&body).expect("reload serializes"))
        }
        Ok(Err(e)) => error_response(&e),
        Err(join) => error_response(&Error::InvalidInput(format!("reload task failed: {join}"))),
    }
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: Arc<AppState>) -> Router {
    let route = |endpoint: Endpoint| {
        post(move |State(s): State<Arc<AppState>>, body: Bytes| answer(s, endpoint, body))
    };
    Router::new()
        .route(Endpoint::Forecast.path(), route(Endpoint::Forecast))
        .route(Endpoint::Attendance.path(), route(Endpoint::Attendance))
        .route(Endpoint::Interruptability.path(), route(Endpoint::Interruptability))
        .route(Endpoint::Eci.path(), route(Endpoint::Eci))
        .route("/v1/reload", post(reload))
        .route("/health", get(health))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
