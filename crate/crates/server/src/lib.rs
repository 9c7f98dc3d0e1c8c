//! HTTP API over the sighting registry: event linking, photo upload, boxes,
//! SEEK coding, contours, ranked matches and identity decisions.
//!
//! Every route lives under `/api/v1` and, apart from `/health`, needs an
//! `Authorization: Bearer <token>` header naming a configured user. JSON
//! responses are `{"data": ..., "registry_version": n}`; errors are
//! `{"error": {"code": ..., "message": ..., "details": ...}}`.

pub mod auth;
pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use auth::{ApiSession, Role};
pub use config::{ServerConfig, UserConfig};
pub use error::ApiError;
pub use routes::{router, Envelope, MatchPage, MatchView, EMPTY_GALLERY_SIGNAL};
pub use state::{AppState, MatchSnapshot, StartupError};

/// A service listening on a socket.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    handle: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    /// Binds `bind` (port 0 picks a free port) and starts serving.
    pub async fn start(state: AppState, bind: SocketAddr) -> std::io::Result<RunningServer> {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        let addr = listener.local_addr()?;
        let state = Arc::new(state);
        let app = router(state.clone());
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        });
        tracing::info!(%addr, "listening");
        Ok(RunningServer {
            addr,
            state,
            shutdown: Some(tx),
            handle,
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        (&mut self.handle)
            .await
            .map_err(|e| std::io::Error::other(e.to_string()))?
    }

    /// Serves until the task ends.
    pub async fn wait(mut self) -> std::io::Result<()> {
        (&mut self.handle)
            .await
            .map_err(|e| std::io::Error::other(e.to_string()))?
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

/// Opens storage from `config` and serves on `config.bind`.
pub async fn serve(config: ServerConfig) -> Result<RunningServer, StartupError> {
    let bind = config.bind;
    let state = AppState::open(config)?;
    Ok(RunningServer::start(state, bind).await?)
}
