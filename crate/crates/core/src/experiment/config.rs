//! TOML configuration: one section per pipeline stage, every field optional.
//!
//! ```toml
//! runs_dir = "runs"
//!
//! [corpus]
//! min_words = 4
//! latest_n = 20000
//!
//! [finetune]
//! steps = 20000
//!
//! [experiment]
//! target_keyword = "rolling toy"
//!
//! [[experiment.domains]]
//! domain_id = "weapons"
//! corpus = "corpora/weapons.tsv"
//! field = "near"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::keywords::{default_stopwords, load_stopwords, ExtractionOptions};
use crate::lm::{FineTuneConfig, GenerationConfig, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub min_words: usize,
    pub latest_n: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_words: 4,
            latest_n: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    /// Seeded bag-of-words hash vectors.
    Hash,
    /// Term vectors from `[novelty] term_vectors`, hash fallback for unknown words.
    TermVectors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// One word per line; the built-in list is used when absent.
    pub stopwords: Option<PathBuf>,
    pub embedding: EmbeddingKind,
    pub embedding_dim: usize,
    pub embedding_seed: u64,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        KeywordConfig {
            ngram_min: 1,
            ngram_max: 2,
            stopwords: None,
            embedding: EmbeddingKind::Hash,
            embedding_dim: 64,
            embedding_seed: 0,
        }
    }
}

impl KeywordConfig {
    pub fn extraction_options(&self) -> Result<ExtractionOptions, ExperimentError> {
        let stopwords = match &self.stopwords {
            Some(path) => load_stopwords(path)?,
            None => default_stopwords(),
        };
        Ok(ExtractionOptions {
            ngram_min: self.ngram_min,
            ngram_max: self.ngram_max,
            stopwords,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub shuffle_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoveltyConfig {
    pub term_vectors: Option<PathBuf>,
    pub bins: usize,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        NoveltyConfig {
            term_vectors: None,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Near,
    Far,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub domain_id: String,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub class_codes: Vec<String>,
    pub corpus: PathBuf,
    #[serde(default)]
    pub field: Option<Field>,
}

impl DomainSpec {
    pub fn display_name(&self) -> &str {
        self.display_name.as_deref().unwrap_or(&self.domain_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target_keyword: String,
    /// Domain the target keyword belongs to, for proximity ranks.
    pub target_domain: Option<String>,
    pub proximity_table: Option<PathBuf>,
    pub alpha: f64,
    pub domains: Vec<DomainSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            target_keyword: "rolling toy".into(),
            target_domain: None,
            proximity_table: None,
            alpha: super::compare::DEFAULT_ALPHA,
            domains: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub proximity_table: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            proximity_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub runs_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub keywords: KeywordConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub finetune: FineTuneConfig,
    pub generation: GenerationConfig,
    pub novelty: NoveltyConfig,
    pub experiment: ExperimentConfig,
    pub service: ServiceConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            runs_dir: PathBuf::from("runs"),
            corpus: CorpusConfig::default(),
            keywords: KeywordConfig::default(),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            finetune: FineTuneConfig::default(),
            generation: GenerationConfig::default(),
            novelty: NoveltyConfig::default(),
            experiment: ExperimentConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Loads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        config.resolve_paths(&base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.runs_dir);
        for p in [
            self.keywords.stopwords.as_mut(),
            self.novelty.term_vectors.as_mut(),
            self.experiment.proximity_table.as_mut(),
            self.service.proximity_table.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        for d in &mut self.experiment.domains {
            resolve(base, &mut d.corpus);
        }
    }

    /// Applies a global seed to every seeded stage.
    pub fn apply_seed(&mut self, seed: u64) {
        self.dataset.shuffle_seed = seed;
        self.finetune.seed = seed;
        self.generation.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Lowercase alphanumeric slug with `-` separators.
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}
