//! Report export, recomputed from run artifacts only.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{compare_fields, ExperimentError, Field, FieldComparison, RunManifest, MANIFEST_FILE};
use crate::ideation::{dedup_stats, read_ideas};
use crate::novelty::{read_novelty_csv, summarize, write_histogram_csv, DistributionSummary};

const EXAMPLES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub run_id: String,
    pub rank: Option<usize>,
    pub domain_id: String,
    pub display_name: String,
    pub proximity: Option<f64>,
    pub n_generated: usize,
    pub n_unique: usize,
    /// One decimal with a percent sign.
    pub pct_unique: String,
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub rows: Vec<TableRow>,
    pub summaries: BTreeMap<String, DistributionSummary>,
    pub comparison: Option<FieldComparison>,
    /// Why no comparison was produced, when one was requested.
    pub comparison_note: Option<String>,
}

/// Every `<runs_dir>/*/manifest.json`, ordered by rank then domain.
pub fn load_manifests(runs_dir: &Path) -> Result<Vec<RunManifest>, ExperimentError> {
    let entries = fs::read_dir(runs_dir).map_err(|e| ExperimentError::io(runs_dir, e))?;
    let mut manifests = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| ExperimentError::io(runs_dir, e))?.path().join(MANIFEST_FILE);
        if path.is_file() {
            manifests.push(RunManifest::load(&path)?);
        }
    }
    manifests.sort_by(|a, b| {
        (a.rank.unwrap_or(usize::MAX), &a.domain_id).cmp(&(b.rank.unwrap_or(usize::MAX), &b.domain_id))
    });
    Ok(manifests)
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

fn mkdir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|e| ExperimentError::io(path, e))
}

fn table_row(runs_dir: &Path, m: &RunManifest) -> Result<TableRow, ExperimentError> {
    let ideas = read_ideas(&runs_dir.join(&m.artifacts.ideas))?;
    let (unique, stats) = dedup_stats(&ideas)?;
    Ok(TableRow {
        run_id: m.run_id.clone(),
        rank: m.rank,
        domain_id: m.domain_id.clone(),
        display_name: m.display_name.clone(),
        proximity: m.proximity,
        n_generated: stats.n_generated,
        n_unique: stats.n_unique,
        pct_unique: stats.pct_display(),
        examples: unique
            .iter()
            .filter(|i| !i.empty)
            .take(EXAMPLES)
            .map(|i| i.text.clone())
            .collect(),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table_csv(rows: &[TableRow]) -> Result<String, ExperimentError> {
    let err = |e: csv::Error| ExperimentError::io("table.csv", e);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "rank".to_string(),
        "domain_id".into(),
        "display_name".into(),
        "proximity".into(),
        "n_generated".into(),
        "n_unique".into(),
        "pct_unique".into(),
    ];
    header.extend((1..=EXAMPLES).map(|i| format!("example_{i}")));
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![
            opt(r.rank),
            r.domain_id.clone(),
            r.display_name.clone(),
            opt(r.proximity.map(|p| format!("{p:.4}"))),
            r.n_generated.to_string(),
            r.n_unique.to_string(),
            r.pct_unique.clone(),
        ];
        rec.extend((0..EXAMPLES).map(|i| r.examples.get(i).cloned().unwrap_or_default()));
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::io("table.csv", e))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn table_text(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<5} {:<24} {:>9} {:>10} {:>8} {:>8}\n",
        "rank", "domain", "proximity", "generated", "unique", "pct"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<5} {:<24} {:>9} {:>10} {:>8} {:>8}\n",
            opt(r.rank),
            r.display_name,
            opt(r.proximity.map(|p| format!("{p:.4}"))),
            r.n_generated,
            r.n_unique,
            r.pct_unique
        ));
        for e in &r.examples {
            out.push_str(&format!("      - {e}\n"));
        }
    }
    out
}

fn comparison_text(c: &FieldComparison) -> String {
    format!(
        "near n={} median={:.4}\nfar n={} median={:.4}\nU(far)={} z={:.4} p={:.6} alpha={}\ndirection={}\n",
        c.near_scores.len(),
        c.median_near,
        c.far_scores.len(),
        c.median_far,
        c.rank_sum_statistic,
        c.z,
        c.p_value,
        c.alpha,
        serde_json::to_value(c.direction).unwrap().as_str().unwrap_or_default()
    )
}

/// Writes `table.csv`, `table.txt`, per-run novelty/loss/histogram CSVs,
/// `summaries.json` and, when runs are labelled near and far,
/// `comparison.json` / `comparison.txt` into `out_dir`.
pub fn export_report(runs_dir: &Path, out_dir: &Path, alpha: f64, bins: usize) -> Result<ReportSummary, ExperimentError> {
    let manifests = load_manifests(runs_dir)?;
    if manifests.is_empty() {
        return Err(ExperimentError::Config(format!("no run manifests under {}", runs_dir.display())));
    }
    for sub in ["novelty", "loss", "histograms"] {
        mkdir(&out_dir.join(sub))?;
    }

    let rows = manifests
        .iter()
        .map(|m| table_row(runs_dir, m))
        .collect::<Result<Vec<_>, _>>()?;
    write(&out_dir.join("table.csv"), &table_csv(&rows)?)?;
    write(&out_dir.join("table.txt"), &table_text(&rows))?;

    let mut summaries = BTreeMap::new();
    let (mut near, mut far) = (Vec::new(), Vec::new());
    for m in &manifests {
        let loss_src = runs_dir.join(&m.artifacts.loss);
        let loss_dst = out_dir.join("loss").join(format!("{}.csv", m.run_id));
        fs::copy(&loss_src, &loss_dst).map_err(|e| ExperimentError::io(&loss_src, e))?;

        let Some(novelty) = &m.artifacts.novelty else { continue };
        let src = runs_dir.join(novelty);
        let scores: Vec<f64> = read_novelty_csv(&src)?.iter().filter_map(|r| r.min_score).collect();
        fs::copy(&src, out_dir.join("novelty").join(format!("{}.csv", m.run_id)))
            .map_err(|e| ExperimentError::io(&src, e))?;
        if !scores.is_empty() {
            let summary = summarize(&scores, bins)?;
            write_histogram_csv(&out_dir.join("histograms").join(format!("{}.csv", m.run_id)), &summary)?;
            summaries.insert(m.run_id.clone(), summary);
        }
        match m.field {
            Some(Field::Near) => near.extend(scores),
            Some(Field::Far) => far.extend(scores),
            None => {}
        }
    }
    let path = out_dir.join("summaries.json");
    write(&path, &(serde_json::to_string_pretty(&summaries).map_err(|e| ExperimentError::io(&path, e))? + "\n"))?;

    let labelled = manifests.iter().any(|m| m.field.is_some());
    let (comparison, comparison_note) = if !labelled {
        (None, None)
    } else {
        match compare_fields(&near, &far, alpha) {
            Ok(c) => (Some(c), None),
            Err(e @ ExperimentError::InsufficientSample { .. }) => {
                log::warn!("{e}");
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        }
    };
    if let Some(c) = &comparison {
        let path = out_dir.join("comparison.json");
        write(&path, &(serde_json::to_string_pretty(c).map_err(|e| ExperimentError::io(&path, e))? + "\n"))?;
        write(&out_dir.join("comparison.txt"), &comparison_text(c))?;
    } else if let Some(note) = &comparison_note {
        write(&out_dir.join("comparison.txt"), &format!("{note}\n"))?;
    }
    Ok(ReportSummary {
        rows,
        summaries,
        comparison,
        comparison_note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::RunArtifacts;
    use crate::ideation::{normalize_idea, write_ideas, IdeaRecord, IdeaSetStats};
    use crate::lm::{CheckpointRef, FineTuneConfig, GenerationConfig, ModelConfig};
    use crate::novelty::{write_novelty_csv, NoveltyRow};
    use std::path::PathBuf;

    fn fake_run(runs: &Path, domain: &str, rank: usize, field: Field, texts: &[&str], scores: &[f64]) {
        let run_id = format!("k-{domain}");
        let dir = runs.join(&run_id);
        fs::create_dir_all(&dir).unwrap();
        fs::create_dir_all(runs.join("ck")).unwrap();
        fs::write(runs.join("ds.txt"), "").unwrap();
        let checkpoint = CheckpointRef { domain_id: domain.into(), step: 1 };
        let ideas: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| IdeaRecord {
                sample_index: i,
                text: t.to_string(),
                normalized: normalize_idea(t),
                target_keyword: "k".into(),
                domain_id: domain.into(),
                checkpoint: checkpoint.clone(),
                truncated: false,
                empty: t.is_empty(),
            })
            .collect();
        write_ideas(&dir.join("ideas.jsonl"), &ideas).unwrap();
        fs::write(dir.join("loss.csv"), "step,loss\n1,2\n").unwrap();
        let rows: Vec<_> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| NoveltyRow {
                run_id: run_id.clone(),
                idea_index: i,
                min_score: Some(s),
                argmin_a: Some("a".into()),
                argmin_b: Some("b".into()),
                n_terms: 2,
                token_count: 3,
            })
            .collect();
        write_novelty_csv(&dir.join("novelty.csv"), &rows).unwrap();
        let m = RunManifest {
            run_id: run_id.clone(),
            domain_id: domain.into(),
            display_name: domain.to_uppercase(),
            field: Some(field),
            target_keyword: "k".into(),
            target_domain: Some("t".into()),
            rank: Some(rank),
            proximity: Some(1.0 / rank as f64),
            corpus_hash: "h".into(),
            corpus_records: 1,
            undersized: true,
            dataset_pairs: 1,
            skipped_titles: 0,
            shuffle_seed: 0,
            model: ModelConfig::default(),
            finetune: FineTuneConfig::default(),
            generation: GenerationConfig::default(),
            checkpoint,
            final_loss: None,
            stats: IdeaSetStats::new(1, 1),
            n_scored: scores.len(),
            n_unscorable: 0,
            artifacts: RunArtifacts {
                dataset: PathBuf::from("ds.txt"),
                checkpoint_dir: PathBuf::from("ck"),
                ideas: PathBuf::from(format!("{run_id}/ideas.jsonl")),
                loss: PathBuf::from(format!("{run_id}/loss.csv")),
                novelty: Some(PathBuf::from(format!("{run_id}/novelty.csv"))),
            },
            created_at: "2020-01-01T00:00:00Z".into(),
            tool_version: "0".into(),
        };
        m.write(runs).unwrap();
    }

    #[test]
    fn report_recomputes_from_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let runs = dir.path().join("runs");
        fake_run(&runs, "far", 2, Field::Far, &["x y", "x y.", "z", "w", "v", ""], &[0.1, 0.2, 0.3]);
        fake_run(&runs, "near", 1, Field::Near, &["a", "b"], &[0.5, 0.6, 0.7]);
        let out = dir.path().join("report");
        let r = export_report(&runs, &out, 0.05, 5).unwrap();
        assert_eq!(r.rows[0].domain_id, "near");
        assert_eq!(r.rows[1].n_generated, 6);
        assert_eq!(r.rows[1].n_unique, 5);
        assert_eq!(r.rows[1].pct_unique, "83.3%");
        assert_eq!(r.rows[1].examples, vec!["x y", "z", "w", "v"]);
        let c = r.comparison.unwrap();
        assert_eq!(c.direction, crate::experiment::Direction::FarLower);
        let csv = fs::read_to_string(out.join("table.csv")).unwrap();
        assert!(csv.starts_with("rank,domain_id,display_name,proximity,n_generated,n_unique,pct_unique,example_1"));
        assert_eq!(csv.lines().count(), 3);
        for f in ["table.txt", "summaries.json", "comparison.json", "loss/k-far.csv", "histograms/k-near.csv"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }

    #[test]
    fn too_few_scores_is_noted_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let runs = dir.path().join("runs");
        fake_run(&runs, "far", 2, Field::Far, &["x"], &[0.1, 0.2]);
        fake_run(&runs, "near", 1, Field::Near, &["a"], &[0.5, 0.6, 0.7]);
        let r = export_report(&runs, &dir.path().join("out"), 0.05, 5).unwrap();
        assert!(r.comparison.is_none());
        assert!(r.comparison_note.unwrap().contains("far 2"));
    }
}
