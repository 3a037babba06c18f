use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use matx_core::generation::Pipeline;
use matx_core::perception::{BackendRegistry, RegistryConfig};
use matx_core::session::SessionRepository;
use matx_core::store::AssetStore;
use matx_core::{Error, Result};
use tokio::sync::{OwnedMutexGuard, Semaphore};

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::jobs::{Job, JobBoard, JobError, JobKind};

/// Shared handles. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: AssetStore,
    sessions: SessionRepository,
    pipeline: Pipeline,
    jobs: JobBoard,
    workers: Arc<Semaphore>,
    session_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Result<Self> {
        let registry_config = RegistryConfig::from_process_env(config.backends.as_deref())?;
        let registry = BackendRegistry::from_config(&registry_config)?;
        let pipeline = Pipeline::new(registry, registry_config.stack);
        Self::with_pipeline(config, pipeline)
    }

    pub fn with_pipeline(config: &ServiceConfig, pipeline: Pipeline) -> Result<Self> {
        if config.workers == 0 {
            return Err(Error::Config("at least one worker is required".into()));
        }
        Ok(AppState {
            inner: Arc::new(Inner {
                store: AssetStore::open(config.storage_root.join("assets"))?,
                sessions: SessionRepository::open(config.storage_root.join("sessions"))?,
                pipeline,
                jobs: JobBoard::default(),
                workers: Arc::new(Semaphore::new(config.workers)),
                session_locks: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn store(&self) -> &AssetStore {
        &self.inner.store
    }

    pub fn sessions(&self) -> &SessionRepository {
        &self.inner.sessions
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.inner.pipeline
    }

    pub fn jobs(&self) -> &JobBoard {
        &self.inner.jobs
    }

    fn session_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.inner
            .session_locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Exclusive write access to one session.
    pub async fn lock_session(&self, id: &str) -> OwnedMutexGuard<()> {
        self.session_lock(id).lock_owned().await
    }

    /// Runs blocking work off the async executor.
    pub async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(AppState) -> Result<T> + Send + 'static,
    {
        let state = self.clone();
        tokio::task::spawn_blocking(move || f(state))
            .await
            .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))?
            .map_err(ApiError::from)
    }

    /// Queues a job. It waits for a worker slot and, when `session` is set,
    /// for that session's write lock; `work` then runs on the blocking pool
    /// with a progress callback.
    pub fn spawn_job<F>(&self, kind: JobKind, session: Option<String>, work: F) -> Job
    where
        F: FnOnce(AppState, &dyn Fn(f64)) -> std::result::Result<serde_json::Value, JobError> + Send + 'static,
    {
        let job = self.jobs().create(kind, session.clone());
        let state = self.clone();
        let id = job.id.clone();
        tokio::spawn(run_job(state, id, session, work));
        job
    }
}

async fn run_job<F>(state: AppState, id: String, session: Option<String>, work: F)
where
    F: FnOnce(AppState, &dyn Fn(f64)) -> std::result::Result<serde_json::Value, JobError> + Send + 'static,
{
    let _permit = match state.inner.workers.clone().acquire_owned().await {
        Ok(p) => p,
        Err(_) => {
            state
                .jobs()
                .fail(&id, JobError::from(&Error::Config("worker pool closed".into())));
            return;
        }
    };
    let _guard = match &session {
        Some(s) => Some(state.lock_session(s).await),
        None => None,
    };
    state.jobs().start(&id);
    let worker_state = state.clone();
    let job_id = id.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let board_state = worker_state.clone();
        let report = move |p: f64| board_state.jobs().progress(&job_id, p);
        work(worker_state, &report)
    })
    .await;
    match outcome {
        Ok(Ok(value)) => state.jobs().finish(&id, value),
        Ok(Err(e)) => {
            log::warn!("job {id} failed: {}", e.message);
            state.jobs().fail(&id, e)
        }
        Err(e) => state.jobs().fail(
            &id,
            JobError {
                kind: "internal".into(),
                stage: None,
                step: None,
                message: format!("worker panicked: {e}"),
            },
        ),
    }
}
