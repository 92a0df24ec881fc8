use std::sync::{Arc, PoisonError};

use aad_core::Label;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::{InstanceDescription, MetricsPayload, QueryPayload, Session, SessionConfig, SessionSummary};
use crate::store::SessionStore;
use crate::SCHEMA_VERSION;

/// Response body: the payload's fields next to `schema_version`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

fn versioned<T>(body: T) -> Json<Versioned<T>> {
    Json(Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub pending: Vec<QueryPayload>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Pending {
    pub pending: Vec<QueryPayload>,
}

/// A label as submitted: `1` anomaly, `-1` nominal.
#[derive(Debug, Serialize, Deserialize)]
pub struct LabelRequest {
    pub instance_id: usize,
    pub label: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelResponse {
    pub metrics: MetricsPayload,
    pub pending: Vec<QueryPayload>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Descriptions {
    pub descriptions: Vec<InstanceDescription>,
}

#[derive(Debug, Deserialize)]
struct DescribeParams {
    ids: Option<String>,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/queries", get(get_queries))
        .route("/sessions/{id}/labels", post(post_label))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/descriptions", get(get_descriptions))
        .with_state(store)
}

/// Runs model work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::BadRequest(format!("worker failed: {e}")))?
}

/// Runs `f` under the session's read lock.
async fn read<T: Send + 'static>(
    store: Arc<SessionStore>,
    id: String,
    f: impl FnOnce(&Session) -> Result<T> + Send + 'static,
) -> Result<T> {
    blocking(move || {
        let session = store.get(&id)?;
        let guard = session.read().unwrap_or_else(PoisonError::into_inner);
        f(&guard)
    })
    .await
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    Json(config): Json<SessionConfig>,
) -> Result<(StatusCode, Json<Versioned<Created>>)> {
    let (id, pending) = blocking(move || store.create(config)).await?;
    Ok((StatusCode::CREATED, versioned(Created { id, pending })))
}

async fn get_session(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<Versioned<SessionSummary>>> {
    Ok(versioned(read(store, id, |s| Ok(s.summary())).await?))
}

async fn get_queries(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<Versioned<Pending>>> {
    let pending = read(store, id, |s| s.pending_queries()).await?;
    Ok(versioned(Pending { pending }))
}

async fn get_metrics(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<Versioned<MetricsPayload>>> {
    Ok(versioned(read(store, id, |s| Ok(s.metrics())).await?))
}

async fn get_descriptions(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(params): Query<DescribeParams>,
) -> Result<Json<Versioned<Descriptions>>> {
    let raw = params
        .ids
        .ok_or_else(|| ServiceError::BadRequest("missing ids parameter".into()))?;
    let ids = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| ServiceError::BadRequest(format!("bad instance id {s:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let descriptions = read(store, id, move |s| s.describe(&ids)).await?;
    Ok(versioned(Descriptions { descriptions }))
}

async fn post_label(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Json(req): Json<LabelRequest>,
) -> Result<Json<Versioned<LabelResponse>>> {
    let label = Label::from_sign(req.label)
        .ok_or_else(|| ServiceError::BadRequest(format!("label must be 1 or -1, got {}", req.label)))?;
    let response = blocking(move || {
        let session = store.get(&id)?;
        let mut guard = session.write().unwrap_or_else(PoisonError::into_inner);
        guard.submit_label(req.instance_id, label)?;
        Ok(LabelResponse {
            metrics: guard.metrics(),
            pending: guard.pending_queries()?,
        })
    })
    .await?;
    Ok(versioned(response))
}
