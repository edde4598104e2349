//! HTTP service over the dependency reference database: the CI gate
//! endpoint, inventory queries, vetting mutations, reports, sync trigger
//! and the event log.

pub mod config;
pub mod error;
pub mod routes;
pub mod webhook;

use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use depgate_core::gate::PolicyConfig;
use depgate_core::store::{Store, StoreError};
use thiserror::Error;

pub use config::{load_config, load_policy, ServiceConfig, SyncSources, WebhookTarget};
pub use error::{ApiError, ApiErrorBody};
pub use routes::router;
pub use webhook::Dispatcher;

/// Source of "now" for every request. Tests pin it.
#[derive(Debug, Clone)]
pub enum Clock {
    System,
    Fixed(Arc<Mutex<DateTime<Utc>>>),
}

impl Clock {
    pub fn fixed(at: DateTime<Utc>) -> Self {
        Clock::Fixed(Arc::new(Mutex::new(at)))
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t.lock().expect("clock lock"),
        }
    }

    /// Moves a fixed clock; no effect on the system clock.
    pub fn set(&self, at: DateTime<Utc>) {
        if let Clock::Fixed(t) = self {
            *t.lock().expect("clock lock") = at;
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub policy: PolicyConfig,
    pub api_token: Option<String>,
    pub internal_prefixes: Vec<String>,
    pub sync: SyncSources,
    pub dispatcher: Arc<Dispatcher>,
    pub clock: Clock,
    pub ui_dir: Option<PathBuf>,
    sync_runs: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(store: Store, policy: PolicyConfig) -> Self {
        AppState {
            store: Arc::new(store),
            policy,
            api_token: None,
            internal_prefixes: Vec::new(),
            sync: SyncSources::default(),
            dispatcher: Arc::new(Dispatcher::new(Vec::new())),
            clock: Clock::System,
            ui_dir: None,
            sync_runs: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, StoreError> {
        let store = Store::open(&cfg.database)?;
        let mut state = AppState::new(store, cfg.policy.clone());
        state.api_token = cfg.api_token.clone();
        state.internal_prefixes = cfg.internal_prefixes.clone();
        state.sync = cfg.sync.clone();
        state.dispatcher = Arc::new(Dispatcher::new(cfg.webhooks.clone()));
        state.ui_dir = cfg.ui_dir.clone();
        Ok(state)
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.api_token = Some(token.into());
        self
    }

    pub(crate) fn next_sync_holder(&self) -> String {
        let n = self.sync_runs.fetch_add(1, Ordering::Relaxed);
        format!("api:{}:{n}", std::process::id())
    }

    /// Runs a store call on the blocking pool.
    pub(crate) async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Store) -> Result<T, ApiError> + Send + 'static,
    {
        let store = Arc::clone(&self.store);
        tokio::task::spawn_blocking(move || f(&store))
            .await
            .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds the configured address and serves until ctrl-c or SIGTERM.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServeError> {
    let state = AppState::from_config(&cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.listen).await.map_err(|source| ServeError::Bind {
        addr: cfg.listen.clone(),
        source,
    })?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve_on(listener, state, shutdown_signal()).await
}

pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
