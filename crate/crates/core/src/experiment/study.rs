//! Running the case study: one independent pipeline per source domain.
//!
//! Layout under the runs directory:
//!
//! ```text
//! keywords/<domain>-<corpus hash>.tsv   resumable keyword cache
//! datasets/<domain>.txt(.manifest)      fine-tuning file
//! checkpoints/<domain>/<step>/          model weights
//! <run_id>/manifest.json                per-run manifest
//! <run_id>/{ideas.jsonl,novelty.csv,loss.csv}
//! study.json                            run ids and failures
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{slug, timestamp, Config, DomainSpec, EmbeddingKind, ExperimentError, RunArtifacts, RunManifest};
use crate::corpus::{
    compute_proximity, corpus_hash, filter_titles, ingest_corpus, select_latest, Domain, ProximityTable,
};
use crate::dataset::{build_pairs, read_dataset, serialize_dataset, DatasetSource};
use crate::ideation::{dedup_stats, generate_ideas, read_ideas, write_ideas};
use crate::keywords::{extract_keyword, EmbeddingBackend, HashEmbedding, KeywordCache, TermVectorEmbedding};
use crate::lm::{finetune, CharModel, CharVocab, CheckpointStore};
use crate::novelty::{idea_novelty, write_novelty_csv, NoveltyRow};
use crate::vectors::TermVectorStore;
use crate::TOOL_VERSION;

/// Shared, read-only inputs of a study.
pub struct RunContext<'a> {
    pub config: &'a Config,
    pub proximity: Option<&'a ProximityTable>,
    pub term_vectors: Option<&'a TermVectorStore>,
    pub created_at: String,
}

impl RunContext<'_> {
    fn runs_dir(&self) -> &Path {
        &self.config.runs_dir
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub path: PathBuf,
    pub corpus_hash: String,
    pub corpus_records: usize,
    pub undersized: bool,
    pub n_pairs: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainFailure {
    pub domain_id: String,
    pub error: String,
    pub backend: bool,
}

#[derive(Debug, Default)]
pub struct StudyOutcome {
    pub manifests: Vec<RunManifest>,
    pub failures: Vec<DomainFailure>,
}

#[derive(Serialize)]
struct StudyIndex<'a> {
    target_keyword: &'a str,
    created_at: &'a str,
    runs: Vec<&'a str>,
    failures: &'a [DomainFailure],
}

/// The keyword embedder selected by the config.
pub fn keyword_backend<'a>(
    config: &Config,
    term_vectors: Option<&'a TermVectorStore>,
) -> Result<Box<dyn EmbeddingBackend + 'a>, ExperimentError> {
    let k = &config.keywords;
    match k.embedding {
        EmbeddingKind::Hash => Ok(Box::new(HashEmbedding::new(k.embedding_seed, k.embedding_dim))),
        EmbeddingKind::TermVectors => {
            let store = term_vectors.ok_or_else(|| {
                ExperimentError::Config("keywords.embedding = \"term-vectors\" needs novelty.term_vectors".into())
            })?;
            Ok(Box::new(TermVectorEmbedding::new(store, k.embedding_seed)))
        }
    }
}

fn domain_of(spec: &DomainSpec) -> Domain {
    Domain {
        domain_id: spec.domain_id.clone(),
        display_name: spec.display_name().to_string(),
        class_codes: spec.class_codes.clone(),
    }
}

/// Loads the configured proximity table, or computes one from the listed
/// corpora when a target domain is configured. `None` when neither applies.
pub fn build_proximity(config: &Config) -> Result<Option<ProximityTable>, ExperimentError> {
    let domains: Vec<Domain> = config.experiment.domains.iter().map(domain_of).collect();
    if let Some(path) = &config.experiment.proximity_table {
        return Ok(Some(ProximityTable::load(path)?.with_domain_metadata(&domains)));
    }
    if config.experiment.target_domain.is_none() {
        return Ok(None);
    }
    let mut records = Vec::new();
    for spec in &config.experiment.domains {
        records.extend(ingest_corpus(&spec.corpus, Some(&spec.domain_id))?);
    }
    Ok(Some(compute_proximity(&records, &domains)?))
}

/// Ingest, filter, select, extract keywords and serialize one domain's
/// fine-tuning file.
pub fn prepare_domain(
    config: &Config,
    spec: &DomainSpec,
    backend: &dyn EmbeddingBackend,
    created_at: &str,
) -> Result<PreparedDataset, ExperimentError> {
    let runs = &config.runs_dir;
    let records = ingest_corpus(&spec.corpus, Some(&spec.domain_id))?;
    let filtered = filter_titles(&records, config.corpus.min_words);
    let selection = select_latest(&filtered, config.corpus.latest_n.max(1));
    let hash = corpus_hash(&selection.records);

    let kw_dir = runs.join("keywords");
    fs::create_dir_all(&kw_dir).map_err(|e| ExperimentError::io(&kw_dir, e))?;
    let mut cache = KeywordCache::open(&kw_dir.join(format!("{}-{}.tsv", spec.domain_id, &hash[..16])))?;
    let opts = config.keywords.extraction_options()?;
    let missing: Vec<_> = selection
        .records
        .iter()
        .filter(|r| cache.get(&r.patent_id).is_none())
        .collect();
    let fresh: Vec<_> = missing
        .par_iter()
        .map(|r| extract_keyword(&r.title, backend, &opts).map_err(|e| e.to_string()))
        .collect();
    let mut failed = std::collections::HashMap::new();
    for (r, kw) in missing.iter().zip(fresh) {
        match kw {
            Ok(kw) => cache.insert(&r.patent_id, &kw)?,
            Err(e) => {
                failed.insert(r.patent_id.clone(), e);
            }
        }
    }
    let outcome = build_pairs(&selection.records, |r| match cache.get(&r.patent_id) {
        Some(kw) => Ok(kw.to_string()),
        None => Err(failed.get(&r.patent_id).cloned().unwrap_or_else(|| "no keyword".into())),
    })?;

    let ds_dir = runs.join("datasets");
    fs::create_dir_all(&ds_dir).map_err(|e| ExperimentError::io(&ds_dir, e))?;
    let path = ds_dir.join(format!("{}.txt", spec.domain_id));
    let source = DatasetSource {
        domain_id: spec.domain_id.clone(),
        corpus_hash: hash.clone(),
        created_at: created_at.to_string(),
    };
    let manifest = serialize_dataset(&outcome.pairs, &path, config.dataset.shuffle_seed, &source)?;
    Ok(PreparedDataset {
        path,
        corpus_hash: hash,
        corpus_records: selection.records.len(),
        undersized: selection.undersized,
        n_pairs: manifest.n_pairs,
        skipped: outcome.skipped,
    })
}

/// Character vocabulary covering the dataset and the target keyword.
pub fn build_vocab(dataset: &Path, keyword: &str) -> Result<CharVocab, ExperimentError> {
    let lines = read_dataset(dataset)?
        .iter()
        .map(|p| p.to_line())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CharVocab::from_texts(
        lines.iter().map(String::as_str).chain(std::iter::once(keyword)),
    ))
}

fn relative(runs: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(runs).unwrap_or(p).to_path_buf()
}

/// Runs the whole pipeline for one source domain and writes its manifest.
pub fn run_domain(ctx: &RunContext<'_>, spec: &DomainSpec) -> Result<RunManifest, ExperimentError> {
    let config = ctx.config;
    let runs = ctx.runs_dir();
    let keyword = &config.experiment.target_keyword;
    let run_id = format!("{}-{}", slug(keyword), spec.domain_id);
    let run_dir = RunManifest::dir(runs, &run_id);
    fs::create_dir_all(&run_dir).map_err(|e| ExperimentError::io(&run_dir, e))?;

    let backend = keyword_backend(config, ctx.term_vectors)?;
    let prepared = prepare_domain(config, spec, backend.as_ref(), &ctx.created_at)?;
    log::info!("{}: {} pairs prepared", spec.domain_id, prepared.n_pairs);

    let vocab = build_vocab(&prepared.path, keyword)?;
    let mut model = CharModel::new(vocab, config.model.clone(), config.finetune.seed);
    let store = CheckpointStore::new(runs.join("checkpoints"));
    let tuned = finetune(&mut model, &prepared.path, &config.finetune, &store, &spec.domain_id)?;
    let loss_path = run_dir.join("loss.csv");
    fs::write(&loss_path, tuned.trace.to_csv()).map_err(|e| ExperimentError::io(&loss_path, e))?;
    log::info!("{}: fine-tuned to {}", spec.domain_id, tuned.checkpoint);

    let total = config.generation.n_samples;
    let tick = (total / 10).max(1);
    let ideas = generate_ideas(&model, keyword, &spec.domain_id, &tuned.checkpoint, &config.generation, |done| {
        if done % tick == 0 {
            log::info!("{}: {done}/{total} ideas", spec.domain_id);
        }
    })?;
    let ideas_path = run_dir.join("ideas.jsonl");
    write_ideas(&ideas_path, &ideas)?;
    let (unique, stats) = dedup_stats(&ideas)?;

    let (mut n_scored, mut n_unscorable, mut novelty_path) = (0, 0, None);
    if let Some(store) = ctx.term_vectors {
        let rows = unique
            .iter()
            .map(|idea| Ok(NoveltyRow::from_outcome(&run_id, &idea_novelty(idea, store)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        n_scored = rows.iter().filter(|r| r.min_score.is_some()).count();
        n_unscorable = rows.len() - n_scored;
        let path = run_dir.join("novelty.csv");
        write_novelty_csv(&path, &rows)?;
        novelty_path = Some(relative(runs, &path));
    }

    let (rank, proximity) = match (ctx.proximity, &config.experiment.target_domain) {
        (Some(table), Some(target)) => {
            let ranked = crate::corpus::rank_domains(table, target)?;
            ranked
                .iter()
                .find(|r| r.domain.domain_id == spec.domain_id)
                .map(|r| (Some(r.rank), Some(r.proximity)))
                .unwrap_or((None, None))
        }
        _ => (None, None),
    };

    let manifest = RunManifest {
        run_id: run_id.clone(),
        domain_id: spec.domain_id.clone(),
        display_name: spec.display_name().to_string(),
        field: spec.field,
        target_keyword: keyword.clone(),
        target_domain: config.experiment.target_domain.clone(),
        rank,
        proximity,
        corpus_hash: prepared.corpus_hash,
        corpus_records: prepared.corpus_records,
        undersized: prepared.undersized,
        dataset_pairs: prepared.n_pairs,
        skipped_titles: prepared.skipped,
        shuffle_seed: config.dataset.shuffle_seed,
        model: config.model.clone(),
        finetune: config.finetune.clone(),
        generation: config.generation.clone(),
        checkpoint: tuned.checkpoint.clone(),
        final_loss: tuned.trace.points.last().map(|p| p.loss),
        stats,
        n_scored,
        n_unscorable,
        artifacts: RunArtifacts {
            dataset: relative(runs, &prepared.path),
            checkpoint_dir: relative(runs, &store.dir(&tuned.checkpoint)),
            ideas: relative(runs, &ideas_path),
            loss: relative(runs, &loss_path),
            novelty: novelty_path,
        },
        created_at: ctx.created_at.clone(),
        tool_version: TOOL_VERSION.to_string(),
    };
    manifest.write(runs)?;
    Ok(manifest)
}

/// Runs every configured source domain in parallel. A failing domain is
/// recorded and does not stop the others.
pub fn run_case_study(config: &Config) -> Result<StudyOutcome, ExperimentError> {
    config.finetune.validate()?;
    config.generation.validate()?;
    if config.experiment.domains.is_empty() {
        return Err(ExperimentError::Config("no [[experiment.domains]] configured".into()));
    }
    let term_vectors = config
        .novelty
        .term_vectors
        .as_deref()
        .map(TermVectorStore::load)
        .transpose()?;
    if term_vectors.is_none() {
        log::warn!("no novelty.term_vectors configured; ideas will not be scored");
    }
    let proximity = build_proximity(config)?;
    let ctx = RunContext {
        config,
        proximity: proximity.as_ref(),
        term_vectors: term_vectors.as_ref(),
        created_at: timestamp(),
    };
    fs::create_dir_all(&config.runs_dir).map_err(|e| ExperimentError::io(&config.runs_dir, e))?;

    let target = config.experiment.target_domain.as_deref();
    let sources: Vec<_> = config
        .experiment
        .domains
        .iter()
        .filter(|d| Some(d.domain_id.as_str()) != target)
        .collect();
    let results: Vec<_> = sources.par_iter().map(|spec| (spec, run_domain(&ctx, spec))).collect();

    let mut outcome = StudyOutcome::default();
    for (spec, result) in results {
        match result {
            Ok(m) => outcome.manifests.push(m),
            Err(e) => {
                log::error!("{}: {e}", spec.domain_id);
                outcome.failures.push(DomainFailure {
                    domain_id: spec.domain_id.clone(),
                    error: e.to_string(),
                    backend: e.is_backend(),
                });
            }
        }
    }
    let index = StudyIndex {
        target_keyword: &config.experiment.target_keyword,
        created_at: &ctx.created_at,
        runs: outcome.manifests.iter().map(|m| m.run_id.as_str()).collect(),
        failures: &outcome.failures,
    };
    let path = config.runs_dir.join("study.json");
    let mut text = serde_json::to_string_pretty(&index).map_err(|e| ExperimentError::io(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(outcome)
}

/// Regenerates a run's ideas from its checkpoint and recorded generation
/// settings; true when they match the stored ideas exactly.
pub fn replay_run(runs_dir: &Path, manifest: &RunManifest) -> Result<bool, ExperimentError> {
    let model = CharModel::load(&runs_dir.join(&manifest.artifacts.checkpoint_dir))?;
    let ideas = generate_ideas(
        &model,
        &manifest.target_keyword,
        &manifest.domain_id,
        &manifest.checkpoint,
        &manifest.generation,
        |_| {},
    )?;
    let stored = read_ideas(&runs_dir.join(&manifest.artifacts.ideas))?;
    Ok(ideas == stored)
}
