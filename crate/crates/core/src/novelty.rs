//! Idea novelty: the minimum pairwise relevancy among the technical terms an
//! idea contains. Lower minimum relevancy means the idea combines more
//! semantically distant terms, i.e. it is more novel.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ideation::IdeaRecord;
use crate::similarity::cosine;
use crate::text::{lower_words, whitespace_tokens};
use crate::vectors::TermVectorStore;

/// Mean term-relevancy score of the reference technology term network,
/// drawn on novelty plots as a comparison line. Only meaningful when the
/// store holds that network's vectors.
pub const REFERENCE_MEAN_RELEVANCY: f64 = 0.133;

#[derive(Debug, thiserror::Error)]
pub enum NoveltyError {
    #[error("unknown term '{0}'")]
    UnknownTerm(String),
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Longest vocabulary phrase starting at word `start`, as `(word_count, term)`.
pub(crate) fn longest_match(
    tokens: &[Option<String>],
    start: usize,
    store: &TermVectorStore,
) -> Option<(usize, String)> {
    let max = store.max_phrase_words().min(tokens.len() - start);
    (1..=max).rev().find_map(|len| {
        let words: Option<Vec<&str>> = tokens[start..start + len]
            .iter()
            .map(|w| w.as_deref())
            .collect();
        let phrase = words?.join(" ");
        store.contains(&phrase).then_some((len, phrase))
    })
}

/// Greedy left-to-right longest-match term extraction over the lowercased,
/// punctuation-stripped text. Matches never overlap; repeated terms are
/// reported once, in first-occurrence order. No stemming.
pub fn extract_terms(text: &str, store: &TermVectorStore) -> Vec<String> {
    let tokens = lower_words(text);
    let mut terms: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is_none() {
            i += 1;
            continue;
        }
        match longest_match(&tokens, i, store) {
            Some((len, term)) => {
                if !terms.contains(&term) {
                    terms.push(term);
                }
                i += len;
            }
            None => i += 1,
        }
    }
    terms
}

/// Cosine similarity between two vocabulary terms.
pub fn relevancy(a: &str, b: &str, store: &TermVectorStore) -> Result<f64, NoveltyError> {
    let va = store
        .get(a)
        .ok_or_else(|| NoveltyError::UnknownTerm(a.to_string()))?;
    let vb = store
        .get(b)
        .ok_or_else(|| NoveltyError::UnknownTerm(b.to_string()))?;
    Ok(cosine(va, vb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: String,
    pub b: String,
    pub relevancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyReport {
    pub sample_index: usize,
    pub terms: Vec<String>,
    pub pair_scores: Vec<PairScore>,
    pub min_score: f64,
    /// Lexicographically ordered pair attaining `min_score`.
    pub argmin_pair: (String, String),
    pub token_count: usize,
}

/// Result of scoring one idea. Ideas with fewer than two matched terms are
/// unscorable; that is an outcome, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum NoveltyOutcome {
    Scored(NoveltyReport),
    Unscorable {
        sample_index: usize,
        terms: Vec<String>,
        token_count: usize,
    },
}

impl NoveltyOutcome {
    pub fn report(&self) -> Option<&NoveltyReport> {
        match self {
            NoveltyOutcome::Scored(r) => Some(r),
            NoveltyOutcome::Unscorable { .. } => None,
        }
    }

    pub fn sample_index(&self) -> usize {
        match self {
            NoveltyOutcome::Scored(r) => r.sample_index,
            NoveltyOutcome::Unscorable { sample_index, .. } => *sample_index,
        }
    }

    pub fn token_count(&self) -> usize {
        match self {
            NoveltyOutcome::Scored(r) => r.token_count,
            NoveltyOutcome::Unscorable { token_count, .. } => *token_count,
        }
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Scores a piece of text. `sample_index` is carried into the report.
pub fn score_text(
    text: &str,
    sample_index: usize,
    store: &TermVectorStore,
) -> Result<NoveltyOutcome, NoveltyError> {
    let terms = extract_terms(text, store);
    let token_count = whitespace_tokens(text);
    if terms.len() < 2 {
        return Ok(NoveltyOutcome::Unscorable {
            sample_index,
            terms,
            token_count,
        });
    }
    let mut pair_scores = Vec::with_capacity(terms.len() * (terms.len() - 1) / 2);
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            pair_scores.push(PairScore {
                a: a.clone(),
                b: b.clone(),
                relevancy: relevancy(a, b, store)?,
            });
        }
    }
    let best = pair_scores
        .iter()
        .min_by(|x, y| {
            x.relevancy
                .total_cmp(&y.relevancy)
                .then_with(|| ordered(&x.a, &x.b).cmp(&ordered(&y.a, &y.b)))
        })
        .expect("at least one pair");
    let (min_score, argmin_pair) = (best.relevancy, ordered(&best.a, &best.b));
    Ok(NoveltyOutcome::Scored(NoveltyReport {
        sample_index,
        terms,
        pair_scores,
        min_score,
        argmin_pair,
        token_count,
    }))
}

pub fn idea_novelty(idea: &IdeaRecord, store: &TermVectorStore) -> Result<NoveltyOutcome, NoveltyError> {
    score_text(&idea.text, idea.sample_index, store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// `bin_count + 1` equal-width edges from `min` to `max`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Count, mean, linearly interpolated quartiles and an equal-width histogram
/// over `[min, max]`.
pub fn summarize(values: &[f64], bin_count: usize) -> Result<DistributionSummary, NoveltyError> {
    if values.is_empty() {
        return Err(NoveltyError::EmptySample);
    }
    let bins = bin_count.max(1);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let width = (max - min) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { max } else { min + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - min) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(DistributionSummary {
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        min,
        max,
        edges,
        counts,
    })
}

/// One exported novelty row. Unscorable ideas have no score or pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyRow {
    pub run_id: String,
    pub idea_index: usize,
    pub min_score: Option<f64>,
    pub argmin_a: Option<String>,
    pub argmin_b: Option<String>,
    pub n_terms: usize,
    pub token_count: usize,
}

impl NoveltyRow {
    pub fn from_outcome(run_id: &str, outcome: &NoveltyOutcome) -> Self {
        match outcome {
            NoveltyOutcome::Scored(r) => NoveltyRow {
                run_id: run_id.to_string(),
                idea_index: r.sample_index,
                min_score: Some(r.min_score),
                argmin_a: Some(r.argmin_pair.0.clone()),
                argmin_b: Some(r.argmin_pair.1.clone()),
                n_terms: r.terms.len(),
                token_count: r.token_count,
            },
            NoveltyOutcome::Unscorable {
                sample_index,
                terms,
                token_count,
            } => NoveltyRow {
                run_id: run_id.to_string(),
                idea_index: *sample_index,
                min_score: None,
                argmin_a: None,
                argmin_b: None,
                n_terms: terms.len(),
                token_count: *token_count,
            },
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> NoveltyError {
    NoveltyError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes rows as CSV with header
/// `run_id,idea_index,min_score,argmin_a,argmin_b,n_terms,token_count`.
pub fn write_novelty_csv(path: &Path, rows: &[NoveltyRow]) -> Result<(), NoveltyError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn read_novelty_csv(path: &Path) -> Result<Vec<NoveltyRow>, NoveltyError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<NoveltyRow>, _>>()
        .map_err(|e| io_err(path, e))
}

/// Writes a histogram as `bin_start,bin_end,count` CSV.
pub fn write_histogram_csv(path: &Path, summary: &DistributionSummary) -> Result<(), NoveltyError> {
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in summary.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", summary.edges[i], summary.edges[i + 1], c));
    }
    file.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}
