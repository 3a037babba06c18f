//! HTTP facade over the material-transfer engine.
//!
//! Binary assets are uploaded once and referenced by content id; every
//! other payload is JSON. Long-running work (segmentation, transfers, plan
//! application, benchmarks) runs as asynchronous jobs polled through
//! `GET /jobs/{id}`. Jobs touching a session hold that session's write lock,
//! so each session has a single writer.

pub mod api;
pub mod config;
pub mod error;
pub mod jobs;
pub mod state;

pub use api::{router, SessionView, StepAccepted};
pub use config::ServiceConfig;
pub use jobs::{Job, JobKind, JobStatus};
pub use state::AppState;

use std::future::Future;

use matx_core::Result;
use tokio::net::TcpListener;

/// Serves until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Binds the configured address and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let state = AppState::new(&config)?;
    let listener = TcpListener::bind(config.listen).await?;
    log::info!(
        "listening on {} (storage {})",
        listener.local_addr()?,
        config.storage_root.display()
    );
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
