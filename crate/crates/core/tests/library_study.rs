//! Drives a small study through the public library API only.

use std::fs;
use std::path::Path;

use ideation_core::experiment::{export_report, load_manifests, replay_run, run_case_study, Config};

const NOUNS: [&str; 8] = ["gear", "spring", "wheel", "lamp", "blade", "valve", "drill", "magnet"];

fn write_corpus(dir: &Path, domain: &str, code: &str, shared_every: usize, offset: usize) {
    let mut text = String::new();
    for i in 0..40 {
        let shared = if i % shared_every == 0 { ";S1" } else { "" };
        let a = NOUNS[(i + offset) % NOUNS.len()];
        let b = NOUNS[(i * 3 + offset + 1) % NOUNS.len()];
        text.push_str(&format!(
            "{domain}-{i:02}\t2021-{:02}-{:02}\t{domain}\t{code}{shared}\tcompact {a} assembly with {b} holder\n",
            1 + i % 12,
            1 + i % 28
        ));
    }
    fs::write(dir.join(format!("{domain}.tsv")), text).unwrap();
}

fn write_fixture(dir: &Path) -> Config {
    write_corpus(dir, "target", "S1", 1, 0);
    write_corpus(dir, "near", "N1", 2, 2);
    write_corpus(dir, "far", "F1", 10, 5);
    let mut vectors = format!("{} 3\n", NOUNS.len());
    for (i, w) in NOUNS.iter().enumerate() {
        vectors.push_str(&format!("{w} {} {} {}\n", (i as f64).cos(), (i as f64).sin(), 0.1 * i as f64));
    }
    fs::write(dir.join("terms.txt"), vectors).unwrap();
    let toml = r#"
runs_dir = "runs"

[model]
hidden = 24
context = 8
embed_dim = 6

[finetune]
steps = 150
log_every = 25
checkpoint_every = 75

[generation]
n_samples = 12
max_new_tokens = 48

[novelty]
term_vectors = "terms.txt"

[experiment]
target_keyword = "gear"
target_domain = "target"

[[experiment.domains]]
domain_id = "target"
corpus = "target.tsv"

[[experiment.domains]]
domain_id = "near"
corpus = "near.tsv"
field = "near"

[[experiment.domains]]
domain_id = "far"
corpus = "far.tsv"
field = "far"
"#;
    let path = dir.join("study.toml");
    fs::write(&path, toml).unwrap();
    let mut config = Config::load(&path).unwrap();
    config.apply_seed(3);
    config
}

#[test]
fn study_report_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let outcome = run_case_study(&config).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);

    let mut ids: Vec<_> = outcome.manifests.iter().map(|m| m.domain_id.as_str()).collect();
    ids.sort();
    assert_eq!(ids, ["far", "near"]);

    let manifests = load_manifests(&config.runs_dir).unwrap();
    assert_eq!(manifests[0].domain_id, "near");
    assert_eq!(manifests[0].rank, Some(1));
    assert_eq!(manifests[1].rank, Some(2));
    assert!(manifests[0].proximity > manifests[1].proximity);
    for m in &manifests {
        assert_eq!(m.stats.n_generated, 12);
        assert!(m.final_loss.is_some_and(f64::is_finite));
        assert!(replay_run(&config.runs_dir, m).unwrap(), "{} did not replay", m.run_id);
    }

    let out = dir.path().join("report");
    let report = export_report(&config.runs_dir, &out, 0.05, 5).unwrap();
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        let pct = 100.0 * row.n_unique as f64 / row.n_generated as f64;
        assert_eq!(row.pct_unique, format!("{pct:.1}%"));
    }
    assert!(report.comparison.is_some() || report.comparison_note.is_some());
    for file in ["table.csv", "table.txt", "summaries.json"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
}
