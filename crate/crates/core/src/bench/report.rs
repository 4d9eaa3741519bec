use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::{BenchReport, TaskRow};
use crate::error::Result;
use crate::numerics::pearson_r;
use crate::trainers::Pipeline;

pub const REPORT_COLUMNS: [&str; 8] = [
    "task",
    "strength",
    "r_unlearnable",
    "r_unreliable",
    "r_incomplete",
    "predicted",
    "actual_semi",
    "actual_self",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub tasks: usize,
    pub consistency_weight: f64,
    /// Pearson r of predicted risk against test error over all rows, by
    /// pipeline; `None` when undefined.
    pub pearson: BTreeMap<String, Option<f64>>,
    /// The same within each augmentation family.
    pub pearson_by_family: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

/// Pearson r over rows where the pipeline has a result; `None` with fewer
/// than two such rows or a constant column.
pub fn pipeline_pearson<'a>(rows: impl IntoIterator<Item = &'a TaskRow>, pipeline: Pipeline) -> Option<f64> {
    let (pred, act): (Vec<f64>, Vec<f64>) = rows
        .into_iter()
        .filter_map(|r| r.actual(pipeline).map(|a| (r.estimates.predicted_risk, a)))
        .unzip();
    pearson_r(&pred, &act).ok()
}

pub fn summarize(report: &BenchReport) -> Summary {
    let mut pearson = BTreeMap::new();
    let mut pearson_by_family = BTreeMap::new();
    for p in report.config.pipelines.iter().copied() {
        pearson.insert(p.name().to_string(), pipeline_pearson(&report.rows, p));
        let mut families: BTreeMap<String, Vec<&TaskRow>> = BTreeMap::new();
        for r in &report.rows {
            families.entry(r.task.family().name().to_string()).or_default().push(r);
        }
        let per: BTreeMap<String, Option<f64>> = families
            .into_iter()
            .map(|(f, rows)| (f, pipeline_pearson(rows, p)))
            .collect();
        pearson_by_family.insert(p.name().to_string(), per);
    }
    Summary {
        config_hash: report.config_hash.clone(),
        seed: report.seed,
        tasks: report.rows.len(),
        consistency_weight: report.config.training.consistency_weight,
        pearson,
        pearson_by_family,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_COLUMNS)?;
    for r in &report.rows {
        let e = &r.estimates;
        w.write_record([
            r.task.to_string(),
            r.task.strength().to_string(),
            e.r_unlearnable.to_string(),
            e.r_unreliable.to_string(),
            e.r_incomplete.to_string(),
            e.predicted_risk.to_string(),
            cell(r.actual_semi),
            cell(r.actual_self),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per (task, pipeline) training run.
pub fn write_runs_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task", "pipeline", "test_error", "consistency_weight", "config_hash"])?;
    for r in &report.rows {
        for p in Pipeline::ALL {
            if let Some(err) = r.actual(p) {
                w.write_record([
                    r.task.to_string(),
                    p.name().to_string(),
                    err.to_string(),
                    report.config.training.consistency_weight.to_string(),
                    report.config_hash.clone(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock cost per task; differs between runs.
pub fn write_timings_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task", "seconds"])?;
    for r in &report.rows {
        w.write_record([r.task.to_string(), format!("{:.3}", r.seconds)])?;
    }
    w.flush()?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter of predicted risk (x) against test error (y) on `[0, 1]^2`,
/// one `circle` per task that has a result.
pub fn scatter_svg(report: &BenchReport, pipeline: Pipeline) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 60.0;
    let span = SIZE - 2.0 * PAD;
    let px = |v: f64| PAD + v.clamp(0.0, 1.0) * span;
    let py = |v: f64| SIZE - PAD - v.clamp(0.0, 1.0) * span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let r = pipeline_pearson(&report.rows, pipeline).map_or("n/a".to_string(), |r| format!("{r:.3}"));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{} pipeline, Pearson r = {r}</text>"#,
        SIZE / 2.0,
        pipeline.name()
    );
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black"><line x1="{PAD}" y1="{b}" x2="{e}" y2="{b}"/><line x1="{PAD}" y1="{b}" x2="{PAD}" y2="{PAD}"/></g>"#,
        b = SIZE - PAD,
        e = SIZE - PAD
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{t}</text><text x="{}" y="{}" text-anchor="end" font-size="11">{t}</text>"#,
            px(t),
            SIZE - PAD + 16.0,
            PAD - 6.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line class="identity" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle" font-size="13">predicted risk</text>"#,
        SIZE / 2.0,
        SIZE - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">actual test error</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    let _ = writeln!(s, r#"<g class="points" fill="steelblue">"#);
    for row in &report.rows {
        if let Some(a) = row.actual(pipeline) {
            let _ = writeln!(
                s,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" data-predicted="{}" data-actual="{a}"><title>{}</title></circle>"#,
                px(row.estimates.predicted_risk),
                py(a),
                row.estimates.predicted_risk,
                escape(&row.task.to_string())
            );
        }
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

/// Writes `report.csv`, `runs.csv`, `timings.csv`, `summary.json` and one
/// `scatter_<pipeline>.svg` per pipeline into `out_dir`; returns the paths.
pub fn emit_report(report: &BenchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let path = out_dir.join("report.csv");
    write_report_csv(report, &path)?;
    written.push(path);
    let path = out_dir.join("runs.csv");
    write_runs_csv(report, &path)?;
    written.push(path);
    let path = out_dir.join("timings.csv");
    write_timings_csv(report, &path)?;
    written.push(path);
    let path = out_dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summarize(report))? + "\n")?;
    written.push(path);
    for p in report.config.pipelines.iter().copied() {
        let path = out_dir.join(format!("scatter_{}.svg", p.name()));
        fs::write(&path, scatter_svg(report, p))?;
        written.push(path);
    }
    Ok(written)
}
