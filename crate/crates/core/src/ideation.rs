//! Bulk idea generation from one virtual-expert checkpoint, normalization,
//! and exact-match deduplication.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lm::{generate_text, CheckpointRef, GenerationConfig, LmError, ModelBackend};

#[derive(Debug, thiserror::Error)]
pub enum IdeationError {
    #[error("generation failed after {completed} completed samples: {source}")]
    Backend {
        completed: usize,
        #[source]
        source: LmError,
    },
    #[error(transparent)]
    Config(LmError),
    #[error("no ideas to deduplicate")]
    Empty,
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaRecord {
    pub sample_index: usize,
    pub text: String,
    pub normalized: String,
    pub target_keyword: String,
    pub domain_id: String,
    pub checkpoint: CheckpointRef,
    pub truncated: bool,
    /// The model produced no text; still counted as generated.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdeaSetStats {
    pub n_generated: usize,
    pub n_unique: usize,
    pub pct_unique: f64,
}

impl IdeaSetStats {
    pub fn new(n_generated: usize, n_unique: usize) -> Self {
        IdeaSetStats {
            n_generated,
            n_unique,
            pct_unique: 100.0 * n_unique as f64 / n_generated as f64,
        }
    }

    /// `35.8%`-style, one decimal.
    pub fn pct_display(&self) -> String {
        format!("{:.1}%", self.pct_unique)
    }
}

const SENTENCE_END: &[char] = &['.', '!', '?', ';', ':', ',', '…'];

/// Lowercases, collapses whitespace runs to single spaces, trims, and drops
/// trailing sentence punctuation.
pub fn normalize_idea(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| SENTENCE_END.contains(&c) || c.is_whitespace())
        .to_string()
}

/// Generates `config.n_samples` ideas for `keyword`. Samples run in
/// parallel but each one's randomness is keyed by its index, so the result
/// equals a sequential run. `progress` receives the running completed count.
pub fn generate_ideas<B, P>(
    backend: &B,
    keyword: &str,
    domain_id: &str,
    checkpoint: &CheckpointRef,
    config: &GenerationConfig,
    progress: P,
) -> Result<Vec<IdeaRecord>, IdeationError>
where
    B: ModelBackend + ?Sized,
    P: Fn(usize) + Sync,
{
    config.validate().map_err(IdeationError::Config)?;
    let completed = AtomicUsize::new(0);
    let results: Vec<Result<IdeaRecord, LmError>> = (0..config.n_samples)
        .into_par_iter()
        .map(|i| {
            let generation = generate_text(backend, keyword, config, i)?;
            let done = completed.fetch_add(1, Ordering::SeqCst) + 1;
            progress(done);
            Ok(IdeaRecord {
                sample_index: i,
                normalized: normalize_idea(&generation.text),
                empty: generation.text.is_empty(),
                text: generation.text,
                target_keyword: keyword.to_string(),
                domain_id: domain_id.to_string(),
                checkpoint: checkpoint.clone(),
                truncated: generation.truncated,
            })
        })
        .collect();
    let ok_count = results.iter().filter(|r| r.is_ok()).count();
    results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| IdeationError::Backend {
            completed: ok_count,
            source,
        })
}

/// True for the first occurrence of each normalized text.
pub fn unique_flags(ideas: &[IdeaRecord]) -> Vec<bool> {
    let mut seen = std::collections::HashSet::new();
    ideas.iter().map(|i| seen.insert(i.normalized.as_str())).collect()
}

/// Keeps the first occurrence of each normalized text.
pub fn dedup_stats(ideas: &[IdeaRecord]) -> Result<(Vec<IdeaRecord>, IdeaSetStats), IdeationError> {
    if ideas.is_empty() {
        return Err(IdeationError::Empty);
    }
    let unique: Vec<_> = ideas
        .iter()
        .zip(unique_flags(ideas))
        .filter(|(_, first)| *first)
        .map(|(i, _)| i.clone())
        .collect();
    let stats = IdeaSetStats::new(ideas.len(), unique.len());
    Ok((unique, stats))
}

/// Writes one JSON record per line.
pub fn write_ideas(path: &Path, ideas: &[IdeaRecord]) -> Result<(), IdeationError> {
    let err = |e: &dyn std::fmt::Display| IdeationError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut out = Vec::new();
    for idea in ideas {
        serde_json::to_writer(&mut out, idea).map_err(|e| err(&e))?;
        out.write_all(b"\n").map_err(|e| err(&e))?;
    }
    fs::write(path, out).map_err(|e| err(&e))
}

pub fn read_ideas(path: &Path) -> Result<Vec<IdeaRecord>, IdeationError> {
    let err = |e: &dyn std::fmt::Display| IdeationError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let text = fs::read_to_string(path).map_err(|e| err(&e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| err(&e)))
        .collect()
}
