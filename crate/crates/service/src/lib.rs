//! Session service exposing the batch active-learning loop over HTTP + JSON.
//!
//! Each session keeps an append-only event log. The first line holds the full
//! configuration and every later line one analyst label, so a log replays to
//! the same weights offline or after a restart.

pub mod error;
pub mod http;
pub mod session;
pub mod store;

pub use error::{Result, ServiceError};
pub use http::router;
pub use session::{Event, MetricsPayload, QueryPayload, Session, SessionConfig};
pub use store::SessionStore;

/// Carried by every response body.
pub const SCHEMA_VERSION: u32 = 1;

/// Serves `router` on `addr` until the process is stopped.
pub async fn serve(store: std::sync::Arc<SessionStore>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}
