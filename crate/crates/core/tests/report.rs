mod common;

use std::fs;
use std::path::Path;

use common::{pearson, tiny_config, FOUR_TASKS};
use pretext_eval::bench::{emit_report, run_benchmark, summarize, RunOptions, Summary, REPORT_COLUMNS};

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn report_files_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_benchmark(&tiny_config(FOUR_TASKS), &RunOptions::default()).unwrap();
    assert!(report.complete);
    emit_report(&report, dir.path()).unwrap();

    let (header, rows) = read_csv(&dir.path().join("report.csv"));
    assert_eq!(header, REPORT_COLUMNS);
    assert_eq!(rows.len(), 4);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["RandomRotation:0", "RandomRotation:6", "Brightness:3", "RandomHorizontalFlip:5"]);

    let col = |name: &str| -> Vec<f64> {
        let i = REPORT_COLUMNS.iter().position(|c| *c == name).unwrap();
        rows.iter().map(|r| r[i].parse().unwrap()).collect()
    };
    let (a, b, c, pred) = (col("r_unlearnable"), col("r_unreliable"), col("r_incomplete"), col("predicted"));
    for i in 0..rows.len() {
        let product = 1.0 - (1.0 - a[i]) * (1.0 - b[i]) * (1.0 - c[i]);
        assert!((pred[i] - product).abs() < 1e-9, "row {i}");
    }
    // identity task
    assert_eq!(a[0], 0.0);

    let summary: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.config_hash, report.config_hash);
    for p in ["semi", "self"] {
        let expected = pearson(&pred, &col(&format!("actual_{p}")));
        let got = summary.pearson[p];
        if expected.is_finite() {
            assert!((got.unwrap() - expected).abs() < 1e-12, "{p}: {got:?} vs {expected}");
        } else {
            assert!(got.is_none());
        }
    }

    for p in ["semi", "self"] {
        let svg = fs::read_to_string(dir.path().join(format!("scatter_{p}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let has_class = |n: &roxmltree::Node, c: &str| n.attribute("class") == Some(c);
        let points: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("circle") && has_class(n, "point")).collect();
        assert_eq!(points.len(), rows.len());
        for (pt, p_i) in points.iter().zip(&pred) {
            let x: f64 = pt.attribute("data-predicted").unwrap().parse().unwrap();
            assert_eq!(x, *p_i);
        }
        assert!(doc.descendants().any(|n| n.has_tag_name("line") && has_class(&n, "identity")));
        let text: String = doc.descendants().filter_map(|n| n.text()).collect();
        assert!(text.contains("predicted risk") && text.contains("actual test error"));
    }
    for f in ["runs.csv", "timings.csv"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn pearson_is_undefined_for_one_row() {
    let report = run_benchmark(&tiny_config("Brightness:3"), &RunOptions::default()).unwrap();
    let s = summarize(&report);
    assert!(s.pearson.values().all(Option::is_none));
}

#[test]
fn reruns_and_thread_counts_give_identical_reports() {
    let cfg = tiny_config(FOUR_TASKS);
    let mut bytes = Vec::new();
    for threads in [Some(1), Some(3), None] {
        let dir = tempfile::tempdir().unwrap();
        let report = run_benchmark(&cfg, &RunOptions { threads, ..RunOptions::default() }).unwrap();
        emit_report(&report, dir.path()).unwrap();
        bytes.push(fs::read(dir.path().join("report.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
}

#[test]
fn interrupted_run_resumes_to_the_same_report() {
    let cfg = tiny_config(FOUR_TASKS);
    let whole = run_benchmark(&cfg, &RunOptions::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("checkpoint.jsonl");
    let opts = |k| RunOptions {
        checkpoint: Some(ckpt.clone()),
        max_new_tasks: k,
        threads: Some(2),
    };
    let partial = run_benchmark(&cfg, &opts(Some(2))).unwrap();
    assert_eq!(partial.rows.len(), 2);
    assert!(!partial.complete);
    // simulate a crash in the middle of writing a row
    let mut text = fs::read_to_string(&ckpt).unwrap();
    text.push_str("{\"task\":\"Bright");
    fs::write(&ckpt, text).unwrap();

    let resumed = run_benchmark(&cfg, &opts(None)).unwrap();
    assert!(resumed.complete);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&whole, a.path()).unwrap();
    emit_report(&resumed, b.path()).unwrap();
    assert_eq!(fs::read(a.path().join("report.csv")).unwrap(), fs::read(b.path().join("report.csv")).unwrap());
    // the checkpoint now holds a header and one line per task
    assert_eq!(fs::read_to_string(&ckpt).unwrap().lines().count(), 5);
}

#[test]
fn checkpoint_from_another_config_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("checkpoint.jsonl");
    let opts = RunOptions {
        checkpoint: Some(ckpt.clone()),
        ..RunOptions::default()
    };
    let first = run_benchmark(&tiny_config("Brightness:3"), &opts).unwrap();
    let mut other = tiny_config("Brightness:3");
    other.seed = 10;
    let second = run_benchmark(&other, &opts).unwrap();
    assert_ne!(first.config_hash, second.config_hash);
    assert_ne!(first.rows[0].estimates, second.rows[0].estimates);
    let header: serde_json::Value = serde_json::from_str(fs::read_to_string(&ckpt).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["config_hash"], second.config_hash.as_str());
}

#[test]
fn repeats_average_independent_runs() {
    let mut cfg = tiny_config("RandomRotation:6");
    let single = run_benchmark(&cfg, &RunOptions::default()).unwrap();
    cfg.training_repeats = 2;
    let seeds = cfg.training_seeds(&"RandomRotation:6".parse().unwrap());
    assert_eq!(seeds[0], cfg.training_seed(&"RandomRotation:6".parse().unwrap()));
    assert_ne!(seeds[0], seeds[1]);
    let double = run_benchmark(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(single.rows[0].estimates, double.rows[0].estimates);
    assert_ne!(single.config_hash, double.config_hash);
}
