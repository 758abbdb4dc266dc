//! JSON-over-HTTP query service.
//!
//! | Method | Path | Body / query | Response |
//! |---|---|---|---|
//! | GET | `/api/tracks` | `?spacecraft=&antenna=&comm_type=` | track summaries |
//! | GET | `/api/tracks/{id}` | `?grid_n=` | reconstructed track |
//! | POST | `/api/compare` | `{a, b, items?, k?}` | similarity breakdown |
//! | POST | `/api/topk` | `{target, k?, items?}` | ranked matches |
//! | POST | `/api/anomalies` | `{target, reference, threshold_z?, min_run?, items?}` | anomaly intervals |
//! | POST | `/api/statdiff` | `{a, b, items?}` | Welch report |
//! | POST | `/api/fidelity` | `{a, b, budget?, items?}` | raw vs compressed (raw sidecars only) |
//!
//! Track references are either a stored id (a JSON string) or an inline
//! track object. Errors are `{"code": ..., "message": ...}` with a 4xx/5xx
//! status. Requests run against an immutable snapshot that is reloaded when
//! the store manifest changes on disk.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use trackdiff_core::metrics::MetricConfig;

use crate::error::{Error, Result};
use crate::query::{Query, TrackFilter, DEFAULT_BUDGET, DEFAULT_TOPK};
use crate::store::{Snapshot, Store};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub store: PathBuf,
    pub metrics: MetricConfig,
    pub topk_default: usize,
    /// Hinge budget for inline tracks.
    pub budget: usize,
}

impl ServiceConfig {
    pub fn new(listen: SocketAddr, store: PathBuf) -> Self {
        Self { listen, store, metrics: MetricConfig::default(), topk_default: DEFAULT_TOPK, budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody { code: self.code().into(), message: self.to_string() })).into_response()
    }
}

struct AppState {
    cfg: ServiceConfig,
    snap: RwLock<Arc<Snapshot>>,
}

impl AppState {
    fn snapshot(&self) -> Result<Arc<Snapshot>> {
        let current = self.snap.read().unwrap().clone();
        if !current.is_stale() {
            return Ok(current);
        }
        let fresh = Arc::new(Snapshot::load(&self.cfg.store)?);
        *self.snap.write().unwrap() = fresh.clone();
        Ok(fresh)
    }
}

type Shared = Arc<AppState>;

/// Builds the router; the store is created if missing.
pub fn router(cfg: ServiceConfig) -> Result<Router> {
    cfg.metrics.validate()?;
    Store::open(&cfg.store)?;
    let snap = Snapshot::load(&cfg.store)?;
    let state = Arc::new(AppState { cfg, snap: RwLock::new(Arc::new(snap)) });
    Ok(Router::new()
        .route("/api/tracks", get(list_tracks))
        .route("/api/tracks/{id}", get(get_track))
        .route("/api/compare", post(compare))
        .route("/api/topk", post(topk))
        .route("/api/anomalies", post(anomalies))
        .route("/api/statdiff", post(statdiff))
        .route("/api/fidelity", post(fidelity))
        .with_state(state))
}

/// Binds and serves until `shutdown` resolves.
pub async fn serve(cfg: ServiceConfig, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<()> {
    let listen = cfg.listen;
    let app = router(cfg)?;
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|e| Error::Invalid(format!("cannot bind {listen}: {e}")))?;
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T> {
    Ok(serde_json::from_slice(body)?)
}

/// Runs a query on the blocking pool; comparisons are CPU-bound.
async fn run<T, F>(state: Shared, f: F) -> Result<Json<T>>
where
    T: Send + 'static,
    F: FnOnce(&Query<'_>) -> Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || {
        let snap = state.snapshot()?;
        let q = Query::new(&snap, &state.cfg.metrics, state.cfg.budget);
        f(&q).map(Json)
    })
    .await
    .map_err(|e| Error::Invalid(format!("query task failed: {e}")))?
}

async fn list_tracks(State(s): State<Shared>, UrlQuery(f): UrlQuery<TrackFilter>) -> Result<impl IntoResponse> {
    run(s, move |q| Ok(q.list_tracks(&f))).await
}

#[derive(Deserialize)]
struct GridParam {
    grid_n: Option<usize>,
}

async fn get_track(
    State(s): State<Shared>,
    Path(id): Path<String>,
    UrlQuery(p): UrlQuery<GridParam>,
) -> Result<impl IntoResponse> {
    run(s, move |q| q.track_series(&id, p.grid_n)).await
}

async fn compare(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse> {
    let req = parse(&body)?;
    run(s, move |q| q.compare(&req)).await
}

async fn topk(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse> {
    let mut req: crate::query::TopkRequest = parse(&body)?;
    req.k = req.k.or(Some(s.cfg.topk_default));
    run(s, move |q| q.topk(&req)).await
}

async fn anomalies(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse> {
    let req = parse(&body)?;
    run(s, move |q| q.anomalies(&req)).await
}

async fn statdiff(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse> {
    let req = parse(&body)?;
    run(s, move |q| q.statdiff(&req)).await
}

async fn fidelity(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse> {
    let req = parse(&body)?;
    run(s, move |q| q.fidelity(&req)).await
}
