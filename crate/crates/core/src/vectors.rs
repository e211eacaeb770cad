//! Term-embedding store loaded from a plain-text vector file.
//!
//! File layout: a `N d` header (term count, dimension), then one line per
//! term with the term (spaces written as underscores) followed by `d`
//! space-separated components.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum VectorFileError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("term '{term}' has {found} components, expected {expected}")]
    Dimension {
        term: String,
        found: usize,
        expected: usize,
    },
    #[error("duplicate term '{0}'")]
    DuplicateTerm(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Immutable lowercase term → vector map.
#[derive(Debug, Clone, Default)]
pub struct TermVectorStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    max_phrase_words: usize,
}

impl TermVectorStore {
    /// Builds a store from in-memory entries. Terms are lowercased; every
    /// vector must share the first entry's dimension.
    pub fn from_entries<I>(entries: I) -> Result<Self, VectorFileError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut store = TermVectorStore::default();
        for (term, vector) in entries {
            store.insert(term, vector, None)?;
        }
        Ok(store)
    }

    fn insert(
        &mut self,
        term: String,
        vector: Vec<f64>,
        declared_dim: Option<usize>,
    ) -> Result<(), VectorFileError> {
        let term = term.to_lowercase();
        let expected = match (self.vectors.is_empty(), declared_dim) {
            (_, Some(d)) => d,
            (true, None) => vector.len(),
            (false, None) => self.dimension,
        };
        if vector.len() != expected || expected == 0 {
            return Err(VectorFileError::Dimension {
                term,
                found: vector.len(),
                expected,
            });
        }
        self.dimension = expected;
        let words = term.split(' ').count();
        if self.vectors.contains_key(&term) {
            return Err(VectorFileError::DuplicateTerm(term));
        }
        self.max_phrase_words = self.max_phrase_words.max(words);
        self.vectors.insert(term, vector);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, VectorFileError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(VectorFileError::Malformed {
            line: 1,
            reason: "missing 'N d' header".into(),
        })?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| VectorFileError::Malformed {
                line: 1,
                reason: format!("bad header: {e}"),
            })?;
        let [count, dim] = header[..] else {
            return Err(VectorFileError::Malformed {
                line: 1,
                reason: "header must be 'N d'".into(),
            });
        };
        let mut store = TermVectorStore::default();
        for (idx, line) in lines {
            let mut parts = line.split_whitespace();
            let term = parts.next().unwrap_or_default().replace('_', " ");
            let vector = parts
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| VectorFileError::Malformed {
                    line: idx + 1,
                    reason: format!("bad component for '{term}': {e}"),
                })?;
            // The first entry fixes the dimension; it must agree with the header.
            store.insert(term, vector, Some(dim))?;
        }
        if store.len() != count {
            return Err(VectorFileError::Malformed {
                line: 1,
                reason: format!("header declares {count} terms, file has {}", store.len()),
            });
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, VectorFileError> {
        let text = fs::read_to_string(path).map_err(|source| VectorFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serializes in the vector-file format with terms in sorted order.
    pub fn to_text(&self) -> String {
        let mut terms: Vec<_> = self.vectors.keys().collect();
        terms.sort();
        let mut out = format!("{} {}\n", self.len(), self.dimension);
        for term in terms {
            out.push_str(&term.replace(' ', "_"));
            for x in &self.vectors[term] {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Longest vocabulary phrase, in words.
    pub fn max_phrase_words(&self) -> usize {
        self.max_phrase_words
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.vectors.contains_key(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}
