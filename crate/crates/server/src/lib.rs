//! HTTP facade over the ideation pipeline: browse proximity-ranked source
//! domains, start generation jobs on fine-tuned checkpoints and fetch the
//! novelty-scored ideas.
//!
//! Endpoints (JSON bodies throughout):
//!
//! - `GET /healthz`
//! - `GET /domains?target=<id>`
//! - `POST /generate`
//! - `GET /jobs/{id}` and `GET /jobs/{id}/ideas`
//!
//! Fine-tuning is CLI-only; the service never writes to the runs directory.

mod api;
pub mod jobs;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use ideation_core::corpus::ProximityTable;
use ideation_core::experiment::Config;
use ideation_core::lm::{CharModel, CheckpointRef, CheckpointStore, LmError};
use ideation_core::vectors::TermVectorStore;

pub use api::{router, DomainEntry, GenerateRequest};
pub use jobs::{IdeaEntry, JobRegistry, JobStatus};

pub const PORT_VAR: &str = "IDEATION_PORT";
pub const RUNS_DIR_VAR: &str = "IDEATION_RUNS_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub host: String,
    pub port: u16,
    pub runs_dir: PathBuf,
    pub proximity_table: Option<PathBuf>,
    pub term_vectors: Option<PathBuf>,
}

impl Settings {
    pub fn from_config(config: &Config) -> Self {
        Settings {
            host: config.service.host.clone(),
            port: config.service.port,
            runs_dir: config.runs_dir.clone(),
            proximity_table: config
                .service
                .proximity_table
                .clone()
                .or_else(|| config.experiment.proximity_table.clone()),
            term_vectors: config.novelty.term_vectors.clone(),
        }
    }

    /// Overrides port and runs directory from the environment.
    pub fn apply_env(mut self) -> Result<Self, String> {
        if let Ok(port) = std::env::var(PORT_VAR) {
            self.port = port.trim().parse().map_err(|e| format!("{PORT_VAR}={port}: {e}"))?;
        }
        if let Ok(dir) = std::env::var(RUNS_DIR_VAR) {
            self.runs_dir = PathBuf::from(dir);
        }
        Ok(self)
    }
}

/// Shared service state.
pub struct AppState {
    pub proximity: Option<ProximityTable>,
    pub term_vectors: Option<TermVectorStore>,
    pub checkpoints: CheckpointStore,
    models: Mutex<HashMap<CheckpointRef, Arc<CharModel>>>,
    loads: Mutex<usize>,
    pub jobs: Mutex<JobRegistry>,
}

impl AppState {
    pub fn new(runs_dir: PathBuf, proximity: Option<ProximityTable>, term_vectors: Option<TermVectorStore>) -> Self {
        AppState {
            proximity,
            term_vectors,
            checkpoints: CheckpointStore::new(runs_dir.join("checkpoints")),
            models: Mutex::new(HashMap::new()),
            loads: Mutex::new(0),
            jobs: Mutex::new(JobRegistry::default()),
        }
    }

    pub fn from_settings(settings: &Settings) -> Result<Self, String> {
        let proximity = settings
            .proximity_table
            .as_deref()
            .map(ProximityTable::load)
            .transpose()
            .map_err(|e| e.to_string())?;
        let term_vectors = settings
            .term_vectors
            .as_deref()
            .map(TermVectorStore::load)
            .transpose()
            .map_err(|e| e.to_string())?;
        Ok(Self::new(settings.runs_dir.clone(), proximity, term_vectors))
    }

    /// Loads a checkpoint on first use; later calls share the same model.
    pub fn model(&self, checkpoint: &CheckpointRef) -> Result<Arc<CharModel>, LmError> {
        let mut models = self.models.lock().expect("model cache poisoned");
        if let Some(m) = models.get(checkpoint) {
            return Ok(m.clone());
        }
        let model = Arc::new(CharModel::load(&self.checkpoints.dir(checkpoint))?);
        *self.loads.lock().expect("load counter poisoned") += 1;
        models.insert(checkpoint.clone(), model.clone());
        Ok(model)
    }

    /// Number of checkpoint loads performed so far.
    pub fn load_count(&self) -> usize {
        *self.loads.lock().expect("load counter poisoned")
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(settings: Settings) -> Result<(), String> {
    let state = Arc::new(AppState::from_settings(&settings)?);
    let addr: SocketAddr = format!("{}:{}", settings.host, settings.port)
        .parse()
        .map_err(|e| format!("bad listen address: {e}"))?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("{addr}: {e}"))?;
    log::info!("listening on {addr}, runs dir {}", settings.runs_dir.display());
    axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
}
