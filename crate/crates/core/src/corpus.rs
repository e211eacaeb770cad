//! Patent-title corpora: ingestion, the title filters used to build
//! fine-tuning sets, and domain-to-domain knowledge proximity.
//!
//! Corpus files are UTF-8 with one record per line and five tab-separated
//! fields:
//!
//! ```text
//! patent_id <TAB> grant_date (YYYY-MM-DD) <TAB> domain_id <TAB> class_codes (;-separated) <TAB> title
//! ```
//!
//! Proximity table files start with a `#proximity v1` header followed by
//! `domain_a <TAB> domain_b <TAB> score` lines.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::similarity::cosine;

pub const PROXIMITY_HEADER: &str = "#proximity v1";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate patent_id '{0}'")]
    DuplicateId(String),
    #[error("unknown domain '{0}'")]
    UnknownDomain(String),
    #[error("no proximity entry for pair ({0}, {1})")]
    MissingPair(String, String),
    #[error("proximity computation needs at least 2 domains, got {0}")]
    TooFewDomains(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub grant_date: NaiveDate,
    pub domain_id: String,
    pub class_codes: Vec<String>,
    pub title: String,
}

impl PatentRecord {
    /// Renders the record in corpus-file line format (without newline).
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.patent_id,
            self.grant_date.format("%Y-%m-%d"),
            self.domain_id,
            self.class_codes.join(";"),
            self.title
        )
    }

    fn parse_line(line: &str, line_no: usize) -> Result<Self, CorpusError> {
        let malformed = |reason: &str| CorpusError::Malformed {
            line: line_no,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        let field = |i: usize, name: &str| -> Result<&str, CorpusError> {
            match fields.get(i).map(|f| f.trim()) {
                Some(f) if !f.is_empty() => Ok(f),
                _ => Err(malformed(&format!("missing {name}"))),
            }
        };
        let patent_id = field(0, "patent_id")?.to_string();
        let date = field(1, "grant_date")?;
        let grant_date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|e| malformed(&format!("bad grant_date '{date}': {e}")))?;
        let domain_id = field(2, "domain_id")?.to_string();
        let class_codes = fields
            .get(3)
            .ok_or_else(|| malformed("missing class_codes"))?
            .split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        let title = field(4, "title")?.to_string();
        Ok(PatentRecord {
            patent_id,
            grant_date,
            domain_id,
            class_codes,
            title,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub domain_id: String,
    pub display_name: String,
    #[serde(default)]
    pub class_codes: Vec<String>,
}

impl Domain {
    pub fn bare(domain_id: &str) -> Self {
        Domain {
            domain_id: domain_id.to_string(),
            display_name: domain_id.to_string(),
            class_codes: Vec::new(),
        }
    }
}

/// Parses corpus text. When `domain_id` is given, every record must belong
/// to that domain.
pub fn parse_corpus(text: &str, domain_id: Option<&str>) -> Result<Vec<PatentRecord>, CorpusError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = PatentRecord::parse_line(line, idx + 1)?;
        if let Some(expected) = domain_id {
            if record.domain_id != expected {
                return Err(CorpusError::Malformed {
                    line: idx + 1,
                    reason: format!(
                        "domain '{}' does not match expected '{expected}'",
                        record.domain_id
                    ),
                });
            }
        }
        if !seen.insert(record.patent_id.clone()) {
            return Err(CorpusError::DuplicateId(record.patent_id));
        }
        records.push(record);
    }
    Ok(records)
}

/// Reads a corpus file, preserving line order.
pub fn ingest_corpus(path: &Path, domain_id: Option<&str>) -> Result<Vec<PatentRecord>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let records = parse_corpus(&text, domain_id)?;
    log::info!("ingested {} records from {}", records.len(), path.display());
    Ok(records)
}

pub fn write_corpus(path: &Path, records: &[PatentRecord]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Stable content hash of a record list (hex SHA-256 over the line format).
pub fn corpus_hash(records: &[PatentRecord]) -> String {
    let mut hasher = Sha256::new();
    for r in records {
        hasher.update(r.to_line().as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Keeps records whose title has at least `min_words` whitespace-delimited
/// words. Hyphenated tokens count as one word.
pub fn filter_titles(records: &[PatentRecord], min_words: usize) -> Vec<PatentRecord> {
    assert!(min_words >= 1, "min_words must be at least 1");
    records
        .iter()
        .filter(|r| r.title.split_whitespace().count() >= min_words)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub records: Vec<PatentRecord>,
    /// Set when the input held fewer than the requested number of records.
    pub undersized: bool,
}

/// Picks the `n` most recently granted records, ties broken by descending
/// `patent_id`. The returned records keep their input order.
pub fn select_latest(records: &[PatentRecord], n: usize) -> Selection {
    assert!(n >= 1, "n must be at least 1");
    if records.len() <= n {
        if records.len() < n {
            log::warn!(
                "corpus has {} records, fewer than the requested {n}; using all",
                records.len()
            );
        }
        return Selection {
            records: records.to_vec(),
            undersized: records.len() < n,
        };
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        rb.grant_date
            .cmp(&ra.grant_date)
            .then_with(|| rb.patent_id.cmp(&ra.patent_id))
    });
    let mut keep = order[..n].to_vec();
    keep.sort_unstable();
    Selection {
        records: keep.into_iter().map(|i| records[i].clone()).collect(),
        undersized: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Loaded,
    Computed,
}

/// Symmetric domain-to-domain proximity scores (higher is closer).
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityTable {
    domains: BTreeMap<String, Domain>,
    entries: BTreeMap<(String, String), f64>,
    pub provenance: Provenance,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl ProximityTable {
    pub fn domains(&self) -> impl Iterator<Item = &Domain> {
        self.domains.values()
    }

    pub fn domain(&self, id: &str) -> Option<&Domain> {
        self.domains.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.domains.contains_key(id)
    }

    /// Replaces display metadata for domains already present in the table.
    pub fn with_domain_metadata(mut self, domains: &[Domain]) -> Self {
        for d in domains {
            if let Some(slot) = self.domains.get_mut(&d.domain_id) {
                *slot = d.clone();
            }
        }
        self
    }

    pub fn lookup(&self, a: &str, b: &str) -> Result<f64, CorpusError> {
        for id in [a, b] {
            if !self.domains.contains_key(id) {
                return Err(CorpusError::UnknownDomain(id.to_string()));
            }
        }
        if let Some(&score) = self.entries.get(&pair_key(a, b)) {
            return Ok(score);
        }
        if a == b {
            // Self-proximity defaults to the row maximum, floored at 1.
            let row_max = self
                .entries
                .iter()
                .filter(|((x, y), _)| x == a || y == a)
                .map(|(_, &s)| s)
                .fold(1.0_f64, f64::max);
            return Ok(row_max);
        }
        Err(CorpusError::MissingPair(a.to_string(), b.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == PROXIMITY_HEADER => {}
            _ => {
                return Err(CorpusError::Malformed {
                    line: 1,
                    reason: format!("expected header '{PROXIMITY_HEADER}'"),
                })
            }
        }
        let mut domains = BTreeMap::new();
        let mut entries = BTreeMap::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| CorpusError::Malformed {
                line: line_no,
                reason,
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(malformed("expected domain_a, domain_b, score".into()));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|e| malformed(format!("bad score '{}': {e}", fields[2])))?;
            if !score.is_finite() {
                return Err(malformed(format!("non-finite score {score}")));
            }
            let key = pair_key(fields[0], fields[1]);
            if let Some(prev) = entries.insert(key, score) {
                if prev != score {
                    return Err(malformed(format!(
                        "asymmetric entry for ({}, {}): {prev} vs {score}",
                        fields[0], fields[1]
                    )));
                }
            }
            for id in &fields[..2] {
                domains
                    .entry(id.to_string())
                    .or_insert_with(|| Domain::bare(id));
            }
        }
        let table = ProximityTable {
            domains,
            entries,
            provenance: Provenance::Loaded,
        };
        table.check_self_dominance()?;
        Ok(table)
    }

    fn check_self_dominance(&self) -> Result<(), CorpusError> {
        for id in self.domains.keys() {
            let Some(&own) = self.entries.get(&pair_key(id, id)) else {
                continue;
            };
            for ((a, b), &s) in &self.entries {
                if (a == id || b == id) && s > own {
                    return Err(CorpusError::Malformed {
                        line: 0,
                        reason: format!("self-proximity of '{id}' ({own}) is below {s} for ({a}, {b})"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(PROXIMITY_HEADER);
        out.push('\n');
        for ((a, b), score) in &self.entries {
            let _ = writeln!(out, "{a}\t{b}\t{score}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_text()).map_err(io_err(path))
    }
}

/// Co-classification proximity: the cosine similarity between per-domain
/// vectors whose component `c` counts that domain's patents carrying class
/// code `c`.
pub fn compute_proximity(
    records: &[PatentRecord],
    domains: &[Domain],
) -> Result<ProximityTable, CorpusError> {
    if domains.len() < 2 {
        return Err(CorpusError::TooFewDomains(domains.len()));
    }
    let codes: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.class_codes.iter().map(String::as_str))
        .collect();
    let index: BTreeMap<&str, usize> = codes.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    let mut vectors: BTreeMap<&str, Vec<f64>> = domains
        .iter()
        .map(|d| (d.domain_id.as_str(), vec![0.0; codes.len()]))
        .collect();
    for r in records {
        if let Some(v) = vectors.get_mut(r.domain_id.as_str()) {
            let distinct: BTreeSet<&str> = r.class_codes.iter().map(String::as_str).collect();
            for c in distinct {
                v[index[c]] += 1.0;
            }
        }
    }
    for (id, v) in &vectors {
        if v.iter().all(|&x| x == 0.0) {
            log::warn!("domain '{id}' has no classified patents; proximity 0 to all others");
        }
    }

    let mut entries = BTreeMap::new();
    for (i, a) in domains.iter().enumerate() {
        entries.insert(pair_key(&a.domain_id, &a.domain_id), 1.0);
        for b in &domains[i + 1..] {
            let score = cosine(&vectors[a.domain_id.as_str()], &vectors[b.domain_id.as_str()]);
            entries.insert(pair_key(&a.domain_id, &b.domain_id), score);
        }
    }
    Ok(ProximityTable {
        domains: domains
            .iter()
            .map(|d| (d.domain_id.clone(), d.clone()))
            .collect(),
        entries,
        provenance: Provenance::Computed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedDomain {
    pub domain: Domain,
    pub rank: usize,
    pub proximity: f64,
}

/// Orders every other domain by descending proximity to `target`, ranks
/// starting at 1, ties broken by ascending `domain_id`.
pub fn rank_domains(table: &ProximityTable, target: &str) -> Result<Vec<RankedDomain>, CorpusError> {
    if !table.contains(target) {
        return Err(CorpusError::UnknownDomain(target.to_string()));
    }
    let mut scored = table
        .domains()
        .filter(|d| d.domain_id != target)
        .map(|d| Ok((d.clone(), table.lookup(target, &d.domain_id)?)))
        .collect::<Result<Vec<_>, CorpusError>>()?;
    scored.sort_by(|(da, pa), (db, pb)| {
        pb.total_cmp(pa)
            .then_with(|| da.domain_id.cmp(&db.domain_id))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (domain, proximity))| RankedDomain {
            domain,
            rank: i + 1,
            proximity,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, date: &str, domain: &str, codes: &[&str], title: &str) -> PatentRecord {
        PatentRecord {
            patent_id: id.into(),
            grant_date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            domain_id: domain.into(),
            class_codes: codes.iter().map(|c| c.to_string()).collect(),
            title: title.into(),
        }
    }

    #[test]
    fn parses_two_lines_in_order() {
        let text = "P2\t2020-01-02\tweapons\tF41A;F41B\tRolling toy air gun\n\
                    P1\t2019-05-06\tweapons\t\tProjectile launcher for toys\n";
        let records = parse_corpus(text, Some("weapons")).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].patent_id, "P2");
        assert_eq!(records[0].class_codes, vec!["F41A", "F41B"]);
        assert!(records[1].class_codes.is_empty());
        assert_eq!(records[1].title, "Projectile launcher for toys");
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus("", None).unwrap().is_empty());
    }

    #[test]
    fn missing_title_reports_line() {
        let text = "A\t2020-01-01\td\tX\tTitle one here\n\
                    B\t2020-01-01\td\tX\tTitle two here\n\
                    C\t2020-01-01\td\tX\n";
        let err = parse_corpus(text, None).unwrap_err();
        assert_eq!(err.to_string(), "line 3: missing title");
        let err = parse_corpus("C\t2020-01-01\td\tX\t   \n", None).unwrap_err();
        assert_eq!(err.to_string(), "line 1: missing title");
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = "A\t2020-01-01\td\tX\tone two three four\nA\t2021-01-01\td\tX\tfive six seven eight\n";
        match parse_corpus(text, None).unwrap_err() {
            CorpusError::DuplicateId(id) => assert_eq!(id, "A"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_date_and_domain_mismatch() {
        assert!(parse_corpus("A\t2020-13-01\td\tX\tone two three four\n", None).is_err());
        let err = parse_corpus("A\t2020-01-01\tother\tX\tone two three four\n", Some("d")).unwrap_err();
        assert!(err.to_string().starts_with("line 1: domain 'other'"));
    }

    #[test]
    fn ingest_reads_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        let records = vec![rec("A", "2020-01-01", "d", &["X"], "Rolling toy air gun")];
        write_corpus(&path, &records).unwrap();
        assert_eq!(ingest_corpus(&path, Some("d")).unwrap(), records);
        assert!(matches!(
            ingest_corpus(&dir.path().join("missing.tsv"), None),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn four_word_rule() {
        let records = vec![
            rec("A", "2020-01-01", "d", &[], "Rolling toy air gun"),
            rec("B", "2020-01-01", "d", &[], "Rolling toy gun"),
            rec("C", "2020-01-01", "d", &[], "Spell-playing rolling toy kit"),
            rec("D", "2020-01-01", "d", &[], "Spell-playing rolling toy"),
        ];
        let kept: Vec<_> = filter_titles(&records, 4).into_iter().map(|r| r.patent_id).collect();
        assert_eq!(kept, vec!["A", "C"]);
        assert!(filter_titles(&[], 4).is_empty());
    }

    #[test]
    fn latest_by_date() {
        let records: Vec<_> = (2018..=2022)
            .map(|y| rec(&format!("P{y}"), &format!("{y}-06-01"), "d", &[], "a b c d"))
            .collect();
        let sel = select_latest(&records, 3);
        let ids: Vec<_> = sel.records.iter().map(|r| r.patent_id.as_str()).collect();
        assert_eq!(ids, vec!["P2020", "P2021", "P2022"]);
        assert!(!sel.undersized);
    }

    #[test]
    fn undersized_corpus_returns_all() {
        let records: Vec<_> = (0..300)
            .map(|i| rec(&format!("P{i:04}"), "2020-01-01", "d", &[], "a b c d"))
            .collect();
        let sel = select_latest(&records, 20_000);
        assert_eq!(sel.records.len(), 300);
        assert!(sel.undersized);
    }

    #[test]
    fn date_tie_keeps_larger_id() {
        let records = vec![
            rec("A", "2021-01-01", "d", &[], "t"),
            rec("B", "2020-01-01", "d", &[], "t"),
            rec("C", "2020-01-01", "d", &[], "t"),
        ];
        let ids: Vec<_> = select_latest(&records, 2)
            .records
            .into_iter()
            .map(|r| r.patent_id)
            .collect();
        assert_eq!(ids, vec!["A", "C"]);
    }

    fn three_domains() -> Vec<Domain> {
        ["A", "B", "C"].iter().map(|d| Domain::bare(d)).collect()
    }

    #[test]
    fn zero_overlap_domain() {
        let records = vec![
            rec("1", "2020-01-01", "A", &["X"], "t"),
            rec("2", "2020-01-01", "A", &["X", "Y"], "t"),
            rec("3", "2020-01-01", "B", &["X"], "t"),
            rec("4", "2020-01-01", "B", &["Y"], "t"),
            rec("5", "2020-01-01", "C", &["Z"], "t"),
        ];
        let table = compute_proximity(&records, &three_domains()).unwrap();
        let ab = table.lookup("A", "B").unwrap();
        let ac = table.lookup("A", "C").unwrap();
        assert!(ab > ac);
        assert_eq!(ac, 0.0);
        assert_eq!(table.provenance, Provenance::Computed);
    }

    #[test]
    fn identical_and_half_cosines() {
        // A = (2,1,0), B = (2,1,0); C = (1,1,0) vs D = (1,0,1).
        let records = vec![
            rec("1", "2020-01-01", "A", &["X"], "t"),
            rec("2", "2020-01-01", "A", &["X", "Y"], "t"),
            rec("3", "2020-01-01", "B", &["X", "Y"], "t"),
            rec("4", "2020-01-01", "B", &["X"], "t"),
            rec("5", "2020-01-01", "C", &["X", "Y"], "t"),
            rec("6", "2020-01-01", "D", &["X", "Z"], "t"),
        ];
        let domains: Vec<_> = ["A", "B", "C", "D"].iter().map(|d| Domain::bare(d)).collect();
        let table = compute_proximity(&records, &domains).unwrap();
        assert!((table.lookup("A", "B").unwrap() - 1.0).abs() < 1e-12);
        let hand = 1.0 / (2f64.sqrt() * 2f64.sqrt());
        assert!((table.lookup("C", "D").unwrap() - hand).abs() < 1e-12);
        assert!((hand - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unclassified_domain_is_zero() {
        let records = vec![
            rec("1", "2020-01-01", "A", &["X"], "t"),
            rec("2", "2020-01-01", "B", &[], "t"),
        ];
        let domains: Vec<_> = ["A", "B"].iter().map(|d| Domain::bare(d)).collect();
        let table = compute_proximity(&records, &domains).unwrap();
        assert_eq!(table.lookup("A", "B").unwrap(), 0.0);
        assert!(matches!(
            compute_proximity(&records, &domains[..1]),
            Err(CorpusError::TooFewDomains(1))
        ));
    }

    fn loaded(rows: &[(&str, &str, f64)]) -> ProximityTable {
        let mut text = format!("{PROXIMITY_HEADER}\n");
        for (a, b, s) in rows {
            text.push_str(&format!("{a}\t{b}\t{s}\n"));
        }
        ProximityTable::parse(&text).unwrap()
    }

    #[test]
    fn ranks_by_descending_proximity() {
        let table = loaded(&[("A", "B", 0.8), ("A", "C", 0.1), ("A", "D", 0.5)]);
        let ranked: Vec<_> = rank_domains(&table, "A")
            .unwrap()
            .into_iter()
            .map(|r| (r.domain.domain_id, r.rank))
            .collect();
        assert_eq!(
            ranked,
            vec![("B".to_string(), 1), ("D".to_string(), 2), ("C".to_string(), 3)]
        );
    }

    #[test]
    fn six_domain_case_study_order() {
        // Proximity decreasing with nearness ranks 13, 17, 28, 64, 68, 100.
        let rows = [
            ("rolling_toys", "weapons", 1.0 / 13.0),
            ("rolling_toys", "agriculture", 1.0 / 17.0),
            ("rolling_toys", "lighting", 1.0 / 28.0),
            ("rolling_toys", "drilling_mining", 1.0 / 64.0),
            ("rolling_toys", "grinding_polishing", 1.0 / 68.0),
            ("rolling_toys", "fuels_lubricants", 1.0 / 100.0),
        ];
        let table = loaded(&rows);
        assert_eq!(table.provenance, Provenance::Loaded);
        let order: Vec<_> = rank_domains(&table, "rolling_toys")
            .unwrap()
            .into_iter()
            .map(|r| r.domain.domain_id)
            .collect();
        assert_eq!(
            order,
            vec![
                "weapons",
                "agriculture",
                "lighting",
                "drilling_mining",
                "grinding_polishing",
                "fuels_lubricants"
            ]
        );
    }

    #[test]
    fn equal_proximity_alphabetical() {
        let table = loaded(&[("A", "C", 0.5), ("A", "B", 0.5)]);
        let ids: Vec<_> = rank_domains(&table, "A")
            .unwrap()
            .into_iter()
            .map(|r| r.domain.domain_id)
            .collect();
        assert_eq!(ids, vec!["B", "C"]);
    }

    #[test]
    fn unknown_target_named() {
        let table = loaded(&[("A", "B", 0.5)]);
        match rank_domains(&table, "Z").unwrap_err() {
            CorpusError::UnknownDomain(id) => assert_eq!(id, "Z"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn table_file_validation() {
        assert!(ProximityTable::parse("A\tB\t0.5\n").is_err());
        assert!(ProximityTable::parse(&format!("{PROXIMITY_HEADER}\nA\tB\tNaN\n")).is_err());
        assert!(ProximityTable::parse(&format!("{PROXIMITY_HEADER}\nA\tB\t0.5\nB\tA\t0.4\n")).is_err());
        assert!(ProximityTable::parse(&format!("{PROXIMITY_HEADER}\nA\tA\t0.2\nA\tB\t0.5\n")).is_err());
        let t = loaded(&[("A", "B", 0.5), ("B", "C", 0.25)]);
        assert!(matches!(t.lookup("A", "C"), Err(CorpusError::MissingPair(..))));
        assert_eq!(t.lookup("A", "A").unwrap(), 1.0);
    }

    #[test]
    fn table_text_roundtrip() {
        let records = vec![
            rec("1", "2020-01-01", "A", &["X", "Y"], "t"),
            rec("2", "2020-01-01", "B", &["X"], "t"),
            rec("3", "2020-01-01", "C", &["Y", "Z"], "t"),
        ];
        let table = compute_proximity(&records, &three_domains()).unwrap();
        let back = ProximityTable::parse(&table.to_text()).unwrap();
        for a in ["A", "B", "C"] {
            for b in ["A", "B", "C"] {
                assert_eq!(back.lookup(a, b).unwrap(), table.lookup(a, b).unwrap());
            }
        }
    }

    fn arb_records() -> impl Strategy<Value = Vec<PatentRecord>> {
        let codes = prop::collection::vec(prop::sample::select(vec!["X", "Y", "Z", "W"]), 0..3);
        prop::collection::vec(
            (0usize..4, codes, 0u32..2000, prop::collection::vec("[a-z]{1,6}", 1..7)),
            0..40,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (d, codes, day, words))| PatentRecord {
                    patent_id: format!("P{i:03}"),
                    grant_date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
                        + chrono::Days::new(day as u64),
                    domain_id: ["A", "B", "C", "D"][d].to_string(),
                    class_codes: codes.into_iter().map(str::to_string).collect(),
                    title: words.join(" "),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(records in arb_records(), min_words in 1usize..6) {
            let once = filter_titles(&records, min_words);
            prop_assert_eq!(filter_titles(&once, min_words), once);
        }

        #[test]
        fn select_latest_is_a_top_subset(records in arb_records(), n in 1usize..50) {
            let sel = select_latest(&records, n);
            prop_assert_eq!(sel.records.len(), n.min(records.len()));
            let kept: HashSet<_> = sel.records.iter().map(|r| r.patent_id.clone()).collect();
            let key = |r: &PatentRecord| (r.grant_date, r.patent_id.clone());
            let min_kept = sel.records.iter().map(key).min();
            for r in &records {
                if !kept.contains(&r.patent_id) {
                    prop_assert!(Some(key(r)) < min_kept);
                }
            }
        }

        #[test]
        fn proximity_symmetric_and_bounded(records in arb_records()) {
            let domains: Vec<_> = ["A", "B", "C", "D"].iter().map(|d| Domain::bare(d)).collect();
            let table = compute_proximity(&records, &domains).unwrap();
            for a in ["A", "B", "C", "D"] {
                for b in ["A", "B", "C", "D"] {
                    let s = table.lookup(a, b).unwrap();
                    prop_assert_eq!(s.to_bits(), table.lookup(b, a).unwrap().to_bits());
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
                    prop_assert!(table.lookup(a, a).unwrap() >= s - 1e-12);
                }
            }
            let ranked = rank_domains(&table, "A").unwrap();
            let ranks: Vec<_> = ranked.iter().map(|r| r.rank).collect();
            prop_assert_eq!(ranks, vec![1, 2, 3]);
            let mut ids: Vec<_> = ranked.iter().map(|r| r.domain.domain_id.clone()).collect();
            ids.sort();
            prop_assert_eq!(ids, vec!["B", "C", "D"]);
        }
    }
}
