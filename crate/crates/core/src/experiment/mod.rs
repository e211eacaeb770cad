//! Case-study orchestration: one run per source domain (prepare, fine-tune,
//! generate, score), manifests that make each run reproducible, report
//! export and the near-field vs far-field comparison.

mod compare;
mod config;
mod manifest;
mod report;
mod study;

use std::path::PathBuf;

pub use compare::{compare_fields, min_scores, rank_sum_test, Direction, FieldComparison, DEFAULT_ALPHA, MIN_SAMPLE};
pub use config::{
    slug, Config, CorpusConfig, DatasetConfig, DomainSpec, EmbeddingKind, ExperimentConfig, Field, KeywordConfig,
    NoveltyConfig, ServiceConfig,
};
pub use manifest::{RunArtifacts, RunManifest, MANIFEST_FILE};
pub use report::{export_report, load_manifests, ReportSummary, TableRow};
pub use study::{
    build_proximity, build_vocab, keyword_backend, prepare_domain, replay_run, run_case_study, run_domain, DomainFailure,
    PreparedDataset, RunContext, StudyOutcome,
};

use crate::corpus::CorpusError;
use crate::dataset::DatasetError;
use crate::ideation::IdeationError;
use crate::keywords::KeywordError;
use crate::lm::LmError;
use crate::novelty::NoveltyError;
use crate::vectors::VectorFileError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("comparison needs at least {MIN_SAMPLE} scored ideas per field (near {near}, far {far})")]
    InsufficientSample { near: usize, far: usize },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Keyword(#[from] KeywordError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Ideation(#[from] IdeationError),
    #[error(transparent)]
    Novelty(#[from] NoveltyError),
    #[error(transparent)]
    Vectors(#[from] VectorFileError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0} of {1} domain runs failed")]
    DomainsFailed(usize, usize),
}

impl ExperimentError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        ExperimentError::Io {
            path: path.into().display().to_string(),
            reason: e.to_string(),
        }
    }

    /// True for failures inside the model backend (training or sampling) as
    /// opposed to bad input data.
    pub fn is_backend(&self) -> bool {
        match self {
            ExperimentError::Lm(e) => !matches!(e, LmError::Dataset(_) | LmError::EmptyDataset | LmError::InvalidConfig(_)),
            ExperimentError::Ideation(IdeationError::Backend { .. }) => true,
            _ => false,
        }
    }
}

/// RFC 3339 UTC timestamp, pinned by `SOURCE_DATE_EPOCH` when set so reruns
/// produce identical artifacts.
pub fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
