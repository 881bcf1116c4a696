//! HTTP front end.
//!
//! | method | path                                | body                    |
//! |--------|-------------------------------------|-------------------------|
//! | POST   | `/api/elections`                    | election file JSON      |
//! | GET    | `/api/elections/{session}`          |                         |
//! | POST   | `/api/elections/{session}/ballots`  | `{voter_id, approvals}` |
//! | POST   | `/api/elections/{session}/tally`    |                         |
//! | POST   | `/api/tally-file`                   | upload document         |
//! | GET    | `/api/health`                       |                         |
//!
//! Tally endpoints answer with the results file produced by
//! [`cabinet_core::io::tally_results`]; the service never scores anything
//! itself. Every JSON response carries `schema_version`.

mod api;
pub mod config;
pub mod store;

use std::io;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use config::Config;
pub use store::SessionStore;

#[derive(Clone)]
pub struct AppState {
    pub config: Arc<Config>,
    pub store: Arc<SessionStore>,
}

impl AppState {
    pub fn new(config: Config) -> AppState {
        AppState {
            store: Arc::new(SessionStore::new(config.session_ttl)),
            config: Arc::new(config),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/health", get(api::health))
        .route("/api/elections", post(api::create_election))
        .route("/api/elections/{session}", get(api::get_election))
        .route("/api/elections/{session}/ballots", post(api::submit_ballot))
        .route("/api/elections/{session}/tally", post(api::tally_session))
        .route("/api/tally-file", post(api::tally_file))
        .layer(DefaultBodyLimit::max(state.config.max_body_bytes));
    let app = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state)
}

pub async fn bind(config: &Config) -> io::Result<TcpListener> {
    TcpListener::bind(&config.bind_addr).await
}

/// Serves until ctrl-c, then writes the session snapshot if configured.
pub async fn serve(listener: TcpListener, config: Config) -> io::Result<()> {
    let state = AppState::new(config);
    if let Some(path) = &state.config.snapshot_path {
        match tokio::fs::read(path).await {
            Ok(bytes) => match serde_json::from_slice(&bytes) {
                Ok(snapshot) => {
                    let n = state.store.restore(snapshot);
                    log::info!("restored {n} sessions from {}", path.display());
                }
                Err(e) => log::warn!("ignoring unreadable snapshot {}: {e}", path.display()),
            },
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
    }

    let sweeper = {
        let store = Arc::clone(&state.store);
        let every = state
            .config
            .session_ttl
            .clamp(Duration::from_secs(1), Duration::from_secs(60));
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(every);
            loop {
                interval.tick().await;
                let purged = store.purge_expired();
                if purged > 0 {
                    log::info!("expired {purged} sessions");
                }
            }
        })
    };

    log::info!("listening on {}", listener.local_addr()?);
    let app = router(state.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    sweeper.abort();

    if let Some(path) = &state.config.snapshot_path {
        let bytes = serde_json::to_vec_pretty(&state.store.to_snapshot()).map_err(io::Error::other)?;
        tokio::fs::write(path, bytes).await?;
        log::info!("saved {} sessions to {}", state.store.len(), path.display());
    }
    Ok(())
}
