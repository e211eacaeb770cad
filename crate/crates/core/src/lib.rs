//! Keyword-conditioned design idea generation.
//!
//! The pipeline turns domain-labelled patent-title corpora into per-domain
//! "virtual expert" language models and uses them to generate short design
//! ideas for a target keyword:
//!
//! 1. [`corpus`] ingests and filters patent titles and ranks source domains
//!    by knowledge proximity to a target domain.
//! 2. [`keywords`] picks one representative key phrase per title by
//!    embedding similarity.
//! 3. [`dataset`] writes the keyword → title fine-tuning file.
//! 4. [`lm`] fine-tunes a causal language model backend and samples from it
//!    with top-k / temperature decoding.
//! 5. [`ideation`] runs bulk generation and deduplicates the results.
//! 6. [`novelty`] scores each idea by the minimum pairwise relevancy of the
//!    technical terms it contains.
//! 7. [`experiment`] ties everything together into reproducible case-study
//!    runs, reports and a near-field vs far-field comparison.

pub mod corpus;
pub mod dataset;
pub mod experiment;
pub mod ideation;
pub mod keywords;
pub mod lm;
pub mod novelty;
pub mod similarity;
pub mod text;
pub mod vectors;

pub use corpus::{Domain, PatentRecord, ProximityTable};
pub use dataset::KeywordTitlePair;
pub use ideation::{IdeaRecord, IdeaSetStats};
pub use lm::{FineTuneConfig, GenerationConfig, LossTrace, ModelBackend};
pub use novelty::NoveltyReport;

/// Version string recorded in run manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
