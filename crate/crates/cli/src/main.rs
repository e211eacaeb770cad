//! `ideation`: command-line driver for the pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ideation_core::corpus::{
    compute_proximity, corpus_hash, filter_titles, ingest_corpus, rank_domains, select_latest, write_corpus, Domain,
    ProximityTable,
};
use ideation_core::experiment::{
    build_vocab, export_report, keyword_backend, prepare_domain, run_case_study, slug, Config, DomainSpec,
    ExperimentError,
};
use ideation_core::ideation::{dedup_stats, generate_ideas, read_ideas, write_ideas};
use ideation_core::lm::{finetune, CharModel, CheckpointStore};
use ideation_core::novelty::{idea_novelty, write_novelty_csv, NoveltyRow};
use ideation_core::vectors::TermVectorStore;
use ideation_server::Settings;

#[derive(Parser, Debug)]
#[command(name = "ideation", version, about = "Keyword-conditioned design idea generation")]
struct Cli {
    /// TOML config file; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for dataset shuffling, fine-tuning and generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    runs_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a corpus file and keep the most recent titles.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Compute a proximity table from classified corpora.
    Proximity {
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Rank source domains by proximity to a target domain.
    Rank {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        target: String,
    },
    /// Extract keywords and write the fine-tuning dataset for a domain.
    Prepare {
        #[arg(long)]
        domain: String,
        /// Corpus file; defaults to the domain's entry in the config.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Fine-tune a fresh model on a domain's dataset.
    Finetune {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Generate ideas from a domain's latest checkpoint.
    Generate {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        keyword: Option<String>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Score the unique ideas of an ideas file.
    Score {
        ideas: PathBuf,
        #[arg(long)]
        term_vectors: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run the full case study and export its report.
    Study,
    /// Export tables, distributions and the field comparison from runs.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Backend(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match &e {
            ExperimentError::Config(_) => Failure::Usage(e.to_string()),
            _ if e.is_backend() => Failure::Backend(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

macro_rules! data_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::from(ExperimentError::from(e))
            }
        }
    )*};
}
data_from!(
    ideation_core::corpus::CorpusError,
    ideation_core::dataset::DatasetError,
    ideation_core::lm::LmError,
    ideation_core::ideation::IdeationError,
    ideation_core::novelty::NoveltyError,
    ideation_core::vectors::VectorFileError,
    ideation_core::keywords::KeywordError
);

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.apply_seed(seed);
    }
    if let Some(dir) = &cli.runs_dir {
        config.runs_dir = dir.clone();
    }
    Ok(config)
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn domain_spec(config: &Config, domain: &str, corpus: Option<PathBuf>) -> Result<DomainSpec, Failure> {
    let configured = config.experiment.domains.iter().find(|d| d.domain_id == domain).cloned();
    match (configured, corpus) {
        (Some(spec), None) => Ok(spec),
        (Some(spec), Some(corpus)) => Ok(DomainSpec { corpus, ..spec }),
        (None, Some(corpus)) => Ok(DomainSpec {
            domain_id: domain.to_string(),
            display_name: None,
            class_codes: Vec::new(),
            corpus,
            field: None,
        }),
        (None, None) => Err(Failure::Usage(format!("domain '{domain}' is not configured; pass --corpus"))),
    }
}

fn term_vectors(config: &Config, path: Option<&Path>) -> Result<Option<TermVectorStore>, Failure> {
    Ok(path
        .or(config.novelty.term_vectors.as_deref())
        .map(TermVectorStore::load)
        .transpose()?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = load_config(&cli)?;
    let runs = config.runs_dir.clone();
    match cli.command {
        Command::Ingest { input, domain, output } => {
            let records = ingest_corpus(&input, domain.as_deref())?;
            let filtered = filter_titles(&records, config.corpus.min_words);
            let selection = select_latest(&filtered, config.corpus.latest_n.max(1));
            write_corpus(&output, &selection.records)?;
            println!(
                "read {} records, {} after title filter, kept {} (sha256 {})",
                records.len(),
                filtered.len(),
                selection.records.len(),
                corpus_hash(&selection.records)
            );
        }
        Command::Proximity { corpora, output } => {
            let mut records = Vec::new();
            for path in &corpora {
                records.extend(ingest_corpus(path, None)?);
            }
            let ids: BTreeSet<&str> = records.iter().map(|r| r.domain_id.as_str()).collect();
            let domains: Vec<Domain> = ids
                .iter()
                .map(|id| {
                    config
                        .experiment
                        .domains
                        .iter()
                        .find(|d| d.domain_id == *id)
                        .map(|d| Domain {
                            domain_id: d.domain_id.clone(),
                            display_name: d.display_name().to_string(),
                            class_codes: d.class_codes.clone(),
                        })
                        .unwrap_or_else(|| Domain::bare(id))
                })
                .collect();
            let table = compute_proximity(&records, &domains)?;
            table.save(&output)?;
            println!("wrote proximity for {} domains to {}", domains.len(), output.display());
        }
        Command::Rank { table, target } => {
            let path = table
                .or(config.experiment.proximity_table.clone())
                .ok_or_else(|| Failure::Usage("no proximity table; pass --table".into()))?;
            let table = ProximityTable::load(&path)?;
            println!("rank\tdomain_id\tdisplay_name\tproximity");
            for r in rank_domains(&table, &target)? {
                println!("{}\t{}\t{}\t{}", r.rank, r.domain.domain_id, r.domain.display_name, r.proximity);
            }
        }
        Command::Prepare { domain, corpus } => {
            let spec = domain_spec(&config, &domain, corpus)?;
            let store = term_vectors(&config, None)?;
            let backend = keyword_backend(&config, store.as_ref())?;
            let prepared = prepare_domain(&config, &spec, backend.as_ref(), &ideation_core::experiment::timestamp())?;
            println!(
                "wrote {} pairs to {} ({} titles skipped)",
                prepared.n_pairs,
                prepared.path.display(),
                prepared.skipped
            );
        }
        Command::Finetune { domain, dataset, steps } => {
            if let Some(steps) = steps {
                config.finetune.steps = steps;
            }
            let dataset = dataset.unwrap_or_else(|| runs.join("datasets").join(format!("{domain}.txt")));
            let vocab = build_vocab(&dataset, &config.experiment.target_keyword)?;
            let mut model = CharModel::new(vocab, config.model.clone(), config.finetune.seed);
            let store = CheckpointStore::new(runs.join("checkpoints"));
            let outcome = finetune(&mut model, &dataset, &config.finetune, &store, &domain)?;
            let loss = store.root().join(&domain).join("loss.csv");
            fs::write(&loss, outcome.trace.to_csv()).map_err(|e| io(&loss, e))?;
            let first = outcome.trace.points.first().map(|p| p.loss);
            let last = outcome.trace.points.last().map(|p| p.loss);
            println!("checkpoint {} (loss {first:?} -> {last:?})", outcome.checkpoint);
        }
        Command::Generate {
            domain,
            keyword,
            n_samples,
            temperature,
            top_k,
            output,
        } => {
            let mut gen = config.generation.clone();
            gen.n_samples = n_samples.unwrap_or(gen.n_samples);
            gen.temperature = temperature.unwrap_or(gen.temperature);
            gen.top_k = top_k.unwrap_or(gen.top_k);
            gen.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let keyword = keyword.unwrap_or_else(|| config.experiment.target_keyword.clone());
            let store = CheckpointStore::new(runs.join("checkpoints"));
            let checkpoint = store
                .latest(&domain)?
                .ok_or_else(|| Failure::Data(format!("domain '{domain}' is not fine-tuned")))?;
            let model = CharModel::load(&store.dir(&checkpoint))?;
            let ideas = generate_ideas(&model, &keyword, &domain, &checkpoint, &gen, |_| {})?;
            write_ideas(&output, &ideas)?;
            let (_, stats) = dedup_stats(&ideas)?;
            println!(
                "{} generated, {} unique ({}) -> {}",
                stats.n_generated,
                stats.n_unique,
                stats.pct_display(),
                output.display()
            );
        }
        Command::Score {
            ideas,
            term_vectors: tv,
            output,
        } => {
            let store = term_vectors(&config, tv.as_deref())?
                .ok_or_else(|| Failure::Usage("no term vectors; pass --term-vectors".into()))?;
            let all = read_ideas(&ideas)?;
            let (unique, _) = dedup_stats(&all)?;
            let run_id = ideas
                .file_stem()
                .map(|s| slug(&s.to_string_lossy()))
                .unwrap_or_default();
            let rows = unique
                .iter()
                .map(|i| Ok(NoveltyRow::from_outcome(&run_id, &idea_novelty(i, &store)?)))
                .collect::<Result<Vec<_>, Failure>>()?;
            write_novelty_csv(&output, &rows)?;
            let scored = rows.iter().filter(|r| r.min_score.is_some()).count();
            println!("{scored} of {} unique ideas scored -> {}", rows.len(), output.display());
        }
        Command::Study => {
            let outcome = run_case_study(&config)?;
            if !outcome.manifests.is_empty() {
                let report = export_report(&runs, &runs.join("report"), config.experiment.alpha, config.novelty.bins)?;
                for row in &report.rows {
                    println!("{}\t{}\t{}/{}\t{}", row.run_id, row.display_name, row.n_unique, row.n_generated, row.pct_unique);
                }
            }
            if let Some(first) = outcome.failures.first() {
                let msg = format!("{} of {} domain runs failed", outcome.failures.len(), config.experiment.domains.len());
                return Err(if outcome.failures.iter().any(|f| f.backend) {
                    Failure::Backend(format!("{msg}; first: {}: {}", first.domain_id, first.error))
                } else {
                    Failure::Data(format!("{msg}; first: {}: {}", first.domain_id, first.error))
                });
            }
        }
        Command::Report { out } => {
            let out = out.unwrap_or_else(|| runs.join("report"));
            let report = export_report(&runs, &out, config.experiment.alpha, config.novelty.bins)?;
            println!("{} runs reported to {}", report.rows.len(), out.display());
            if let Some(note) = report.comparison_note {
                println!("comparison skipped: {note}");
            }
        }
        Command::Serve { port } => {
            let mut settings = Settings::from_config(&config).apply_env().map_err(Failure::Usage)?;
            if let Some(port) = port {
                settings.port = port;
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Backend(e.to_string()))?;
            rt.block_on(ideation_server::serve(settings)).map_err(Failure::Data)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (1, m),
                Failure::Data(m) => (2, m),
                Failure::Backend(m) => (3, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
