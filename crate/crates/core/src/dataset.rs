//! Keyword → title fine-tuning dataset.
//!
//! Each example is one line: `<|s|>KEYWORD => TITLE<|e|>`. The start and end
//! markers let generation be seeded with `<|s|>KEYWORD => ` and stopped at
//! `<|e|>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PatentRecord;

pub const START: &str = "<|s|>";
pub const END: &str = "<|e|>";
pub const SEPARATOR: &str = " => ";

/// Maximum tolerated share of records whose keyword extraction fails.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{failed} of {total} keyword extractions failed (more than 10%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("pair ({keyword:?}, {title:?}) {reason}")]
    InvalidPair {
        keyword: String,
        title: String,
        reason: String,
    },
    #[error("offset {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("cannot serialize an empty dataset")]
    Empty,
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeywordTitlePair {
    pub keyword: String,
    pub title: String,
}

impl KeywordTitlePair {
    pub fn new(keyword: impl Into<String>, title: impl Into<String>) -> Self {
        KeywordTitlePair {
            keyword: keyword.into(),
            title: title.into(),
        }
    }

    fn invalid(&self, reason: &str) -> DatasetError {
        DatasetError::InvalidPair {
            keyword: self.keyword.clone(),
            title: self.title.clone(),
            reason: reason.to_string(),
        }
    }

    /// Renders the example line, rejecting pairs that would not parse back.
    pub fn to_line(&self) -> Result<String, DatasetError> {
        for field in [&self.keyword, &self.title] {
            if field.trim().is_empty() {
                return Err(self.invalid("has an empty field"));
            }
            if field.contains(START) || field.contains(END) || field.contains('\n') || field.contains('\r') {
                return Err(self.invalid("contains a delimiter"));
            }
        }
        if self.keyword.contains(SEPARATOR) || self.title.contains(SEPARATOR) {
            return Err(self.invalid("contains the separator"));
        }
        let line = format!("{START}{}{SEPARATOR}{}{END}", self.keyword, self.title);
        match parse_example(&line) {
            Ok(back) if &back == self => Ok(line),
            _ => Err(self.invalid("is ambiguous around the separator")),
        }
    }
}

#[derive(Debug, Default)]
pub struct BuildOutcome {
    pub pairs: Vec<KeywordTitlePair>,
    /// Records skipped because keyword extraction failed.
    pub skipped: usize,
}

/// One pair per record, keyword produced by `keyword_fn`. Failed extractions
/// are skipped and counted; more than 10% failures is an error.
pub fn build_pairs<F, E>(records: &[PatentRecord], mut keyword_fn: F) -> Result<BuildOutcome, DatasetError>
where
    F: FnMut(&PatentRecord) -> Result<String, E>,
    E: std::fmt::Display,
{
    let mut outcome = BuildOutcome::default();
    for record in records {
        match keyword_fn(record) {
            Ok(keyword) => outcome.pairs.push(KeywordTitlePair::new(keyword, record.title.clone())),
            Err(e) => {
                log::warn!("skipping {}: keyword extraction failed: {e}", record.patent_id);
                outcome.skipped += 1;
            }
        }
    }
    if outcome.skipped as f64 > MAX_FAILURE_RATE * records.len() as f64 {
        return Err(DatasetError::TooManyFailures {
            failed: outcome.skipped,
            total: records.len(),
        });
    }
    if outcome.skipped > 0 {
        log::warn!("{} records skipped during keyword extraction", outcome.skipped);
    }
    Ok(outcome)
}

/// Parses one dataset line back into a pair.
pub fn parse_example(line: &str) -> Result<KeywordTitlePair, DatasetError> {
    let err = |offset: usize, reason: &str| DatasetError::Parse {
        offset,
        reason: reason.to_string(),
    };
    let body = line
        .strip_prefix(START)
        .ok_or_else(|| err(0, "missing start delimiter"))?;
    let body = body
        .strip_suffix(END)
        .ok_or_else(|| err(line.len(), "missing end delimiter"))?;
    let sep = body
        .find(SEPARATOR)
        .ok_or_else(|| err(START.len(), "missing separator"))?;
    let keyword = &body[..sep];
    let title = &body[sep + SEPARATOR.len()..];
    if keyword.trim().is_empty() {
        return Err(err(START.len(), "empty keyword"));
    }
    if title.trim().is_empty() {
        return Err(err(START.len() + sep + SEPARATOR.len(), "empty title"));
    }
    Ok(KeywordTitlePair::new(keyword, title))
}

/// Reads and parses every non-empty line of a dataset file.
pub fn read_dataset(path: &Path) -> Result<Vec<KeywordTitlePair>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            parse_example(l).map_err(|e| match e {
                DatasetError::Parse { offset, reason } => DatasetError::Parse {
                    offset,
                    reason: format!("line {}: {reason}", i + 1),
                },
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub domain_id: String,
    pub n_pairs: usize,
    pub source_corpus_hash: String,
    pub created_at: String,
    pub shuffle_seed: u64,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        format!(
            "domain_id={}\nn_pairs={}\nsource_corpus_hash={}\ncreated_at={}\nshuffle_seed={}\n",
            self.domain_id, self.n_pairs, self.source_corpus_hash, self.created_at, self.shuffle_seed
        )
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |k: &str| {
            map.get(k).copied().ok_or_else(|| DatasetError::Parse {
                offset: 0,
                reason: format!("manifest missing '{k}'"),
            })
        };
        let num = |k: &str| -> Result<u64, DatasetError> {
            get(k)?.parse().map_err(|e| DatasetError::Parse {
                offset: 0,
                reason: format!("manifest '{k}': {e}"),
            })
        };
        Ok(DatasetManifest {
            domain_id: get("domain_id")?.to_string(),
            n_pairs: num("n_pairs")? as usize,
            source_corpus_hash: get("source_corpus_hash")?.to_string(),
            created_at: get("created_at")?.to_string(),
            shuffle_seed: num("shuffle_seed")?,
        })
    }

    /// Path of the manifest that sits beside `dataset_path`.
    pub fn path_for(dataset_path: &Path) -> PathBuf {
        let mut name = dataset_path.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest");
        dataset_path.with_file_name(name)
    }

    pub fn load(dataset_path: &Path) -> Result<Self, DatasetError> {
        let path = Self::path_for(dataset_path);
        let text = fs::read_to_string(&path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

/// Where a dataset came from; recorded in its manifest.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    pub domain_id: String,
    pub corpus_hash: String,
    pub created_at: String,
}

/// Shuffles `pairs` with `shuffle_seed`, writes one example per line and a
/// key-value manifest beside the file.
pub fn serialize_dataset(
    pairs: &[KeywordTitlePair],
    path: &Path,
    shuffle_seed: u64,
    source: &DatasetSource,
) -> Result<DatasetManifest, DatasetError> {
    if pairs.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut lines = pairs
        .iter()
        .map(KeywordTitlePair::to_line)
        .collect::<Result<Vec<_>, _>>()?;
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    let mut out = lines.join("\n");
    out.push('\n');
    let io = |p: &Path, e: std::io::Error| DatasetError::Io {
        path: p.display().to_string(),
        reason: e.to_string(),
    };
    fs::write(path, out).map_err(|e| io(path, e))?;
    let manifest = DatasetManifest {
        domain_id: source.domain_id.clone(),
        n_pairs: lines.len(),
        source_corpus_hash: source.corpus_hash.clone(),
        created_at: source.created_at.clone(),
        shuffle_seed,
    };
    let mpath = DatasetManifest::path_for(path);
    fs::write(&mpath, manifest.to_text()).map_err(|e| io(&mpath, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keywords::{extract_keyword, ExtractionOptions, HashEmbedding};
    use crate::text::contains_phrase;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn rec(id: &str, title: &str) -> PatentRecord {
        PatentRecord {
            patent_id: id.into(),
            grant_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            domain_id: "d".into(),
            class_codes: vec![],
            title: title.into(),
        }
    }

    fn source() -> DatasetSource {
        DatasetSource {
            domain_id: "d".into(),
            corpus_hash: "abc".into(),
            created_at: "2020-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn builds_one_pair_per_record() {
        let records = [rec("1", "Rolling toy air gun"), rec("2", "Dart board set"), rec("3", "Wheeled target")];
        let backend = HashEmbedding::new(0, 8);
        let o = ExtractionOptions::default();
        let out = build_pairs(&records, |r| extract_keyword(&r.title, &backend, &o)).unwrap();
        assert_eq!(out.pairs.len(), 3);
        assert_eq!(out.skipped, 0);
        assert_eq!(out.pairs[1].title, "Dart board set");
    }

    #[test]
    fn failed_extraction_is_skipped_or_fatal() {
        let mut records: Vec<_> = (0..10).map(|i| rec(&i.to_string(), "Rolling toy air gun")).collect();
        let stop = ExtractionOptions {
            stopwords: ["the", "of"].iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        };
        let backend = HashEmbedding::new(0, 8);
        records[4].title = "The of".into();
        let out = build_pairs(&records, |r| extract_keyword(&r.title, &backend, &stop)).unwrap();
        assert_eq!((out.pairs.len(), out.skipped), (9, 1));

        let three = [rec("1", "Rolling toy air gun"), rec("2", "The of"), rec("3", "Dart board set")];
        assert!(matches!(
            build_pairs(&three, |r| extract_keyword(&r.title, &backend, &stop)),
            Err(DatasetError::TooManyFailures { failed: 1, total: 3 })
        ));
    }

    #[test]
    fn keywords_are_title_subphrases() {
        let adjectives = ["red", "quiet", "folding", "electric", "wooden"];
        let nouns = ["launcher", "target", "wheel", "reel", "lamp", "drill bit", "spindle drive"];
        let records: Vec<_> = (0..200)
            .map(|i| {
                rec(
                    &format!("P{i}"),
                    &format!("{} rolling toy {}", adjectives[i % 5], nouns[i % 7]),
                )
            })
            .collect();
        let backend = HashEmbedding::new(11, 16);
        let o = ExtractionOptions::default();
        let out = build_pairs(&records, |r| extract_keyword(&r.title, &backend, &o)).unwrap();
        assert_eq!(out.pairs.len(), 200);
        for p in &out.pairs {
            assert!(contains_phrase(&p.title, &p.keyword), "{p:?}");
            assert_eq!(p.keyword, p.keyword.to_lowercase());
        }
    }

    #[test]
    fn line_format() {
        let p = KeywordTitlePair::new("air gun", "Rolling toy air gun");
        assert_eq!(p.to_line().unwrap(), "<|s|>air gun => Rolling toy air gun<|e|>");
        assert_eq!(
            parse_example("<|s|>gun => Toy gun set<|e|>").unwrap(),
            KeywordTitlePair::new("gun", "Toy gun set")
        );
    }

    #[test]
    fn delimiter_in_field_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = [KeywordTitlePair::new("gun<|e|>", "Toy gun")];
        assert!(matches!(
            serialize_dataset(&bad, &dir.path().join("d.txt"), 1, &source()),
            Err(DatasetError::InvalidPair { .. })
        ));
        assert!(KeywordTitlePair::new("a => b", "t").to_line().is_err());
        assert!(KeywordTitlePair::new("x =>", "t").to_line().is_err());
        assert!(matches!(
            serialize_dataset(&[], &dir.path().join("e.txt"), 1, &source()),
            Err(DatasetError::Empty)
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_example("<|s|>gun =>    <|e|>"), Err(DatasetError::Parse { .. })));
        assert!(parse_example("<|s|>gun => Toy   <|e|>").is_ok());
        assert!(matches!(parse_example("<|s|>gun => Toy"), Err(DatasetError::Parse { .. })));
        assert!(matches!(parse_example("gun => Toy<|e|>"), Err(DatasetError::Parse { offset: 0, .. })));
        assert!(matches!(parse_example("<|s|>gun Toy<|e|>"), Err(DatasetError::Parse { .. })));
    }

    #[test]
    fn seeded_shuffle_is_deterministic_and_manifest_matches() {
        let dir = tempfile::tempdir().unwrap();
        let pairs: Vec<_> = (0..50)
            .map(|i| KeywordTitlePair::new(format!("kw{i}"), format!("Title number {i}")))
            .collect();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        let m = serialize_dataset(&pairs, &a, 42, &source()).unwrap();
        serialize_dataset(&pairs, &b, 42, &source()).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let text = fs::read_to_string(&a).unwrap();
        assert_eq!(m.n_pairs, text.lines().count());
        assert_eq!(DatasetManifest::load(&a).unwrap(), m);

        let mut back = read_dataset(&a).unwrap();
        assert_ne!(back, pairs, "seed 42 should reorder 50 items");
        back.sort();
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(back, sorted);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn roundtrip_identity(kw in "[a-z][a-z0-9 -]{0,20}", title in "[A-Za-z][A-Za-z0-9 ,.'()-]{0,60}") {
            let p = KeywordTitlePair::new(kw, title);
            let line = p.to_line().unwrap();
            prop_assert_eq!(parse_example(&line).unwrap(), p);
        }
    }
}
