//! Per-run manifest: everything needed to reproduce one domain's run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, Field};
use crate::ideation::IdeaSetStats;
use crate::lm::{CheckpointRef, FineTuneConfig, GenerationConfig, ModelConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Artifact paths, relative to the runs directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub dataset: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub ideas: PathBuf,
    pub loss: PathBuf,
    pub novelty: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub domain_id: String,
    pub display_name: String,
    pub field: Option<Field>,
    pub target_keyword: String,
    pub target_domain: Option<String>,
    /// Rank among source domains by proximity to the target (1 = closest).
    pub rank: Option<usize>,
    pub proximity: Option<f64>,
    pub corpus_hash: String,
    pub corpus_records: usize,
    pub undersized: bool,
    pub dataset_pairs: usize,
    pub skipped_titles: usize,
    pub shuffle_seed: u64,
    pub model: ModelConfig,
    pub finetune: FineTuneConfig,
    pub generation: GenerationConfig,
    pub checkpoint: CheckpointRef,
    pub final_loss: Option<f64>,
    pub stats: IdeaSetStats,
    pub n_scored: usize,
    pub n_unscorable: usize,
    pub artifacts: RunArtifacts,
    pub created_at: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn dir(runs_dir: &Path, run_id: &str) -> PathBuf {
        runs_dir.join(run_id)
    }

    /// Writes `<runs_dir>/<run_id>/manifest.json` after checking that every
    /// referenced artifact exists.
    pub fn write(&self, runs_dir: &Path) -> Result<PathBuf, ExperimentError> {
        let a = &self.artifacts;
        let paths = [&a.dataset, &a.checkpoint_dir, &a.ideas, &a.loss]
            .into_iter()
            .chain(a.novelty.as_ref());
        for p in paths {
            if p.is_absolute() {
                return Err(ExperimentError::Config(format!("artifact path {} is not relative", p.display())));
            }
            if !runs_dir.join(p).exists() {
                return Err(ExperimentError::io(runs_dir.join(p), "referenced artifact does not exist"));
            }
        }
        let dir = Self::dir(runs_dir, &self.run_id);
        fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| ExperimentError::io(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| ExperimentError::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::io(path, e))
    }
}
