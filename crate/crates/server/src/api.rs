use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ideation_core::corpus::{rank_domains, CorpusError};
use ideation_core::ideation::{generate_ideas, unique_flags, IdeaRecord};
use ideation_core::lm::{CheckpointRef, GenerationConfig};
use ideation_core::novelty::{idea_novelty, NoveltyOutcome};
use ideation_core::text::whitespace_tokens;

use crate::jobs::{IdeaEntry, JobStatus};
use crate::AppState;

type Shared = Arc<AppState>;

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn err(status: StatusCode, msg: impl Into<String>) -> ApiError {
    ApiError(status, msg.into())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/domains", get(domains))
        .route("/generate", post(generate))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/ideas", get(job_ideas))
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
struct DomainsQuery {
    target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub domain_id: String,
    pub display_name: String,
    pub rank: usize,
    pub proximity: f64,
    pub has_checkpoint: bool,
}

async fn domains(State(state): State<Shared>, Query(q): Query<DomainsQuery>) -> Result<Json<Vec<DomainEntry>>, ApiError> {
    let table = state
        .proximity
        .as_ref()
        .ok_or_else(|| err(StatusCode::SERVICE_UNAVAILABLE, "no proximity table loaded"))?;
    let ranked = rank_domains(table, &q.target).map_err(|e| match e {
        CorpusError::UnknownDomain(d) => err(StatusCode::NOT_FOUND, format!("unknown domain '{d}'")),
        other => err(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    })?;
    let entries = ranked
        .into_iter()
        .map(|r| DomainEntry {
            has_checkpoint: matches!(state.checkpoints.latest(&r.domain.domain_id), Ok(Some(_))),
            domain_id: r.domain.domain_id,
            display_name: r.domain.display_name,
            rank: r.rank,
            proximity: r.proximity,
        })
        .collect();
    Ok(Json(entries))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub target_keyword: String,
    pub domain_id: String,
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub temperature: Option<f64>,
    pub top_k: Option<usize>,
    pub max_new_tokens: Option<usize>,
}

impl GenerateRequest {
    pub fn generation_config(&self) -> GenerationConfig {
        let d = GenerationConfig::default();
        GenerationConfig {
            temperature: self.temperature.unwrap_or(d.temperature),
            top_k: self.top_k.unwrap_or(d.top_k),
            max_new_tokens: self.max_new_tokens.unwrap_or(d.max_new_tokens),
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }
}

async fn generate(
    State(state): State<Shared>,
    body: Result<Json<GenerateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let Json(req) = body.map_err(|e| err(StatusCode::BAD_REQUEST, e.body_text()))?;
    let config = req.generation_config();
    config.validate().map_err(|e| err(StatusCode::BAD_REQUEST, e.to_string()))?;
    if req.target_keyword.trim().is_empty() {
        return Err(err(StatusCode::BAD_REQUEST, "target_keyword must not be empty"));
    }
    let checkpoint = state
        .checkpoints
        .latest(&req.domain_id)
        .map_err(|e| err(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .ok_or_else(|| err(StatusCode::CONFLICT, "domain not fine-tuned"))?;

    let id = state.jobs.lock().expect("job registry poisoned").create(config.n_samples);
    let worker = state.clone();
    tokio::task::spawn_blocking(move || run_job(&worker, id, &req, &checkpoint, &config));
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id.to_string() }))))
}

fn run_job(state: &AppState, id: u64, req: &GenerateRequest, checkpoint: &CheckpointRef, config: &GenerationConfig) {
    state.jobs.lock().expect("job registry poisoned").transition(id, JobStatus::Running);
    let result = state
        .model(checkpoint)
        .map_err(|e| e.to_string())
        .and_then(|model| {
            generate_ideas(model.as_ref(), &req.target_keyword, &req.domain_id, checkpoint, config, |done| {
                state.jobs.lock().expect("job registry poisoned").advance(id, done);
            })
            .map_err(|e| e.to_string())
        })
        .and_then(|ideas| idea_entries(state, &ideas));
    let mut jobs = state.jobs.lock().expect("job registry poisoned");
    match result {
        Ok(entries) => jobs.finish(id, entries),
        Err(e) => {
            log::error!("job {id} failed: {e}");
            jobs.fail(id, e)
        }
    }
}

/// Flags and scores ideas with the same functions the batch pipeline uses.
fn idea_entries(state: &AppState, ideas: &[IdeaRecord]) -> Result<Vec<IdeaEntry>, String> {
    ideas
        .iter()
        .zip(unique_flags(ideas))
        .map(|(idea, is_unique)| {
            let outcome = match &state.term_vectors {
                Some(store) => Some(idea_novelty(idea, store).map_err(|e| e.to_string())?),
                None => None,
            };
            let report = outcome.as_ref().and_then(NoveltyOutcome::report);
            Ok(IdeaEntry {
                sample_index: idea.sample_index,
                text: idea.text.clone(),
                is_unique,
                min_score: report.map(|r| r.min_score),
                argmin_pair: report.map(|r| r.argmin_pair.clone()),
                token_count: outcome
                    .as_ref()
                    .map(NoveltyOutcome::token_count)
                    .unwrap_or_else(|| whitespace_tokens(&idea.text)),
            })
        })
        .collect()
}

fn parse_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| err(StatusCode::NOT_FOUND, format!("unknown job '{raw}'")))
}

async fn job_status(State(state): State<Shared>, Path(raw): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let id = parse_id(&raw)?;
    let jobs = state.jobs.lock().expect("job registry poisoned");
    let job = jobs.get(id).ok_or_else(|| err(StatusCode::NOT_FOUND, format!("unknown job '{raw}'")))?;
    Ok(Json(json!({
        "status": job.status,
        "progress": job.progress(),
        "error": job.error,
    })))
}

async fn job_ideas(State(state): State<Shared>, Path(raw): Path<String>) -> Result<Json<Vec<IdeaEntry>>, ApiError> {
    let id = parse_id(&raw)?;
    let jobs = state.jobs.lock().expect("job registry poisoned");
    let job = jobs.get(id).ok_or_else(|| err(StatusCode::NOT_FOUND, format!("unknown job '{raw}'")))?;
    match (&job.status, &job.ideas) {
        (JobStatus::Done, Some(ideas)) => Ok(Json(ideas.clone())),
        (status, _) => Err(err(StatusCode::CONFLICT, format!("job is {status:?}, not done").to_lowercase())),
    }
}
