//! HTTP API of the ECG annotation service. JSON over HTTP/1.1 with bearer
//! token authentication; see `routes` for the endpoint table and `error`
//! for the error codes.

pub mod config;
pub mod error;
mod extract;
pub mod routes;

use std::future::Future;
use std::sync::Arc;

use axum::http::Uri;
use axum::Router;
use cardiolabel_core::annotation::Campaign;
use cardiolabel_core::auth::{Auth, AuthConfig};
use cardiolabel_core::storage::{StorageError, Store, StoreOptions};
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

pub use config::ServerConfig;
pub use error::ApiError;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub auth: Auth,
    pub campaign: Campaign,
    /// bounds concurrent password hashing, which is memory-hard by design
    pub password_slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(store: Arc<Store>, auth_config: AuthConfig) -> Self {
        let slots = std::thread::available_parallelism().map_or(2, |n| n.get().max(2));
        AppState {
            auth: Auth::new(store.clone(), auth_config),
            campaign: Campaign::new(store.clone()),
            store,
            password_slots: Arc::new(Semaphore::new(slots)),
        }
    }

    /// Opens an initialized data directory.
    pub fn open(config: &ServerConfig) -> Result<Self, StorageError> {
        let store = Store::open(&config.data_dir, StoreOptions::default())?;
        Ok(AppState::new(Arc::new(store), config.auth_config()))
    }
}

/// Runs storage work off the async executor.
pub(crate) async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn not_found(uri: Uri) -> ApiError {
    ApiError::new(404, "not_found", format!("no route for {}", uri.path()))
}

pub fn router(state: AppState) -> Router {
    routes::api_routes().fallback(not_found).with_state(state)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
