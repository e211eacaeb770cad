use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LmError, ModelBackend};

const LATEST: &str = "latest";

/// A saved model: `<root>/<domain_id>/<step>/`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub domain_id: String,
    pub step: usize,
}

impl fmt::Display for CheckpointRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.domain_id, self.step)
    }
}

/// Checkpoint directory tree with a per-domain `latest` marker file.
#[derive(Debug, Clone)]
pub struct CheckpointStore {
    root: PathBuf,
}

impl CheckpointStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CheckpointStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, checkpoint: &CheckpointRef) -> PathBuf {
        self.root
            .join(&checkpoint.domain_id)
            .join(checkpoint.step.to_string())
    }

    fn err(path: &Path, e: impl fmt::Display) -> LmError {
        LmError::Checkpoint {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    /// Saves `backend` and moves the domain's `latest` marker to it.
    pub fn save<B: ModelBackend + ?Sized>(
        &self,
        backend: &B,
        domain_id: &str,
        step: usize,
    ) -> Result<CheckpointRef, LmError> {
        let checkpoint = CheckpointRef {
            domain_id: domain_id.to_string(),
            step,
        };
        let dir = self.dir(&checkpoint);
        fs::create_dir_all(&dir).map_err(|e| Self::err(&dir, e))?;
        backend.save(&dir)?;
        let marker = self.root.join(domain_id).join(LATEST);
        fs::write(&marker, format!("{step}\n")).map_err(|e| Self::err(&marker, e))?;
        Ok(checkpoint)
    }

    /// The checkpoint named by the domain's `latest` marker, if any.
    pub fn latest(&self, domain_id: &str) -> Result<Option<CheckpointRef>, LmError> {
        let marker = self.root.join(domain_id).join(LATEST);
        if !marker.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&marker).map_err(|e| Self::err(&marker, e))?;
        let step = text.trim().parse().map_err(|e| Self::err(&marker, e))?;
        let checkpoint = CheckpointRef {
            domain_id: domain_id.to_string(),
            step,
        };
        if !self.dir(&checkpoint).is_dir() {
            return Err(Self::err(&marker, "points at a missing checkpoint"));
        }
        Ok(Some(checkpoint))
    }
}
