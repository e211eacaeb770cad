//! Single key-phrase extraction per patent title.
//!
//! Candidates are contiguous word n-grams of the title that neither start nor
//! end with a stopword. The keyword is the candidate whose embedding is most
//! cosine-similar to the embedding of the whole title.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::similarity::cosine;
use crate::text::{lower_words, words};
use crate::vectors::TermVectorStore;

#[derive(Debug, thiserror::Error)]
pub enum KeywordError {
    #[error("no candidates")]
    NoCandidates,
    #[error("invalid n-gram range {0}..={1}")]
    BadRange(usize, usize),
    #[error("embedding failed for text #{index}: {reason}")]
    Embedding { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Text → fixed-dimension vector.
///
/// Implementations must be deterministic. Backends that cannot take
/// concurrent calls report `false` from [`concurrent_safe`] and are then
/// called sequentially.
///
/// [`concurrent_safe`]: EmbeddingBackend::concurrent_safe
pub trait EmbeddingBackend: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, String>;
    fn concurrent_safe(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePhrase {
    pub text: String,
    /// Word index of the first word.
    pub start: usize,
    /// Word index one past the last word.
    pub end: usize,
}

impl CandidatePhrase {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionOptions {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub stopwords: HashSet<String>,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            ngram_min: 1,
            ngram_max: 2,
            stopwords: HashSet::new(),
        }
    }
}

/// A small English stopword list suitable for patent titles.
pub fn default_stopwords() -> HashSet<String> {
    [
        "a", "an", "and", "as", "at", "by", "for", "from", "in", "into", "of", "on", "or", "the",
        "to", "with", "without", "its", "thereof", "therefor", "same", "using", "use", "method",
        "methods", "system", "systems", "apparatus", "device", "devices",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Reads a stopword file (one word per line).
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>, KeywordError> {
    let text = fs::read_to_string(path).map_err(|source| KeywordError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Enumerates candidate phrases, shortest n-grams first and left to right
/// within each length. Duplicates keep their first occurrence.
pub fn extract_candidates(
    title: &str,
    opts: &ExtractionOptions,
) -> Result<Vec<CandidatePhrase>, KeywordError> {
    if opts.ngram_min == 0 || opts.ngram_min > opts.ngram_max {
        return Err(KeywordError::BadRange(opts.ngram_min, opts.ngram_max));
    }
    let tokens = lower_words(title);
    let is_stop = |w: &str| opts.stopwords.contains(w);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for n in opts.ngram_min..=opts.ngram_max {
        for start in 0..tokens.len().saturating_sub(n - 1) {
            let window = &tokens[start..start + n];
            let Some(phrase) = window
                .iter()
                .map(|w| w.as_deref())
                .collect::<Option<Vec<&str>>>()
            else {
                continue;
            };
            if is_stop(phrase[0]) || is_stop(phrase[n - 1]) {
                continue;
            }
            let text = phrase.join(" ");
            if seen.insert(text.clone()) {
                out.push(CandidatePhrase {
                    text,
                    start,
                    end: start + n,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(KeywordError::NoCandidates);
    }
    Ok(out)
}

/// Embeds `texts` in order. Concurrency follows the backend's declaration.
pub fn embed_batch<B>(texts: &[&str], backend: &B) -> Result<Vec<Vec<f64>>, KeywordError>
where
    B: EmbeddingBackend + ?Sized,
{
    let one = |(index, text): (usize, &&str)| {
        backend
            .embed(text)
            .map_err(|reason| KeywordError::Embedding { index, reason })
    };
    if backend.concurrent_safe() {
        texts.par_iter().enumerate().map(one).collect()
    } else {
        texts.iter().enumerate().map(one).collect()
    }
}

/// Picks the candidate most similar to the whole title. Ties go to the
/// earliest span, then the shorter phrase.
pub fn extract_keyword<B>(
    title: &str,
    backend: &B,
    opts: &ExtractionOptions,
) -> Result<String, KeywordError>
where
    B: EmbeddingBackend + ?Sized,
{
    let candidates = extract_candidates(title, opts)?;
    let title_vec = backend
        .embed(title)
        .map_err(|reason| KeywordError::Embedding { index: 0, reason })?;
    let mut best: Option<(&CandidatePhrase, f64)> = None;
    for cand in &candidates {
        let v = backend.embed(&cand.text).map_err(|reason| KeywordError::Embedding {
            index: 0,
            reason,
        })?;
        let score = cosine(&title_vec, &v);
        let better = match best {
            None => true,
            Some((b, s)) => {
                score > s
                    || (score == s
                        && (cand.start, cand.len()) < (b.start, b.len()))
            }
        };
        if better {
            best = Some((cand, score));
        }
    }
    Ok(best.expect("candidates are non-empty").0.text.clone())
}

/// Deterministic bag-of-words embedding: each lowercase word maps to a
/// pseudo-random vector derived from `(seed, word)`; a text embeds to the
/// unit-normalized sum of its word vectors.
#[derive(Debug, Clone)]
pub struct HashEmbedding {
    pub seed: u64,
    pub dimension: usize,
}

impl HashEmbedding {
    pub fn new(seed: u64, dimension: usize) -> Self {
        HashEmbedding { seed, dimension }
    }

    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        hashed_vector(self.seed, word, self.dimension)
    }
}

pub(crate) fn hashed_vector(seed: u64, word: &str, dimension: usize) -> Vec<f64> {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(word.as_bytes())
        .finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(key);
    (0..dimension).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = crate::similarity::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

impl EmbeddingBackend for HashEmbedding {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut acc = vec![0.0; self.dimension];
        for w in lower_words(text).into_iter().flatten() {
            for (a, x) in acc.iter_mut().zip(self.word_vector(&w)) {
                *a += x;
            }
        }
        Ok(normalize(acc))
    }
}

/// Embeds text as the normalized sum of term vectors matched greedily
/// against a [`TermVectorStore`]; words outside the vocabulary fall back to
/// hashed vectors of the same dimension.
pub struct TermVectorEmbedding<'a> {
    store: &'a TermVectorStore,
    fallback_seed: u64,
}

impl<'a> TermVectorEmbedding<'a> {
    pub fn new(store: &'a TermVectorStore, fallback_seed: u64) -> Self {
        TermVectorEmbedding {
            store,
            fallback_seed,
        }
    }
}

impl EmbeddingBackend for TermVectorEmbedding<'_> {
    fn dimension(&self) -> usize {
        self.store.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        let dim = self.store.dimension();
        let tokens = lower_words(text);
        let mut acc = vec![0.0; dim];
        let mut i = 0;
        while i < tokens.len() {
            let Some(word) = tokens[i].as_deref() else {
                i += 1;
                continue;
            };
            let matched = crate::novelty::longest_match(&tokens, i, self.store);
            let (len, vec) = match matched {
                Some((len, term)) => (len, self.store.get(&term).unwrap().to_vec()),
                None => (1, hashed_vector(self.fallback_seed, word, dim)),
            };
            for (a, x) in acc.iter_mut().zip(vec) {
                *a += x;
            }
            i += len;
        }
        Ok(normalize(acc))
    }
}

/// Resumable `patent_id<TAB>keyword` cache.
#[derive(Debug)]
pub struct KeywordCache {
    path: std::path::PathBuf,
    entries: HashMap<String, String>,
}

impl KeywordCache {
    pub fn open(path: &Path) -> Result<Self, KeywordError> {
        let io = |source| KeywordError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            for line in fs::read_to_string(path).map_err(io)?.lines() {
                if let Some((id, kw)) = line.split_once('\t') {
                    entries.insert(id.to_string(), kw.to_string());
                }
            }
        }
        Ok(KeywordCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, patent_id: &str) -> Option<&str> {
        self.entries.get(patent_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, patent_id: &str, keyword: &str) -> Result<(), KeywordError> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| writeln!(f, "{patent_id}\t{keyword}").map(|_| f))
            .map_err(|source| KeywordError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        file.flush().ok();
        self.entries.insert(patent_id.to_string(), keyword.to_string());
        Ok(())
    }
}

/// Words of `title` (original casing) for display and checks.
pub fn title_words(title: &str) -> Vec<&str> {
    words(title).into_iter().flatten().collect()
}
