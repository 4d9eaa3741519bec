//! Runs a benchmark config (default: the 24-task desk correlation run)
//! and writes the reports.
//!
//! Usage: cargo run --release --example synthetic_benchmark [config.json] [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use pretext_eval::bench::{emit_report, run_benchmark, summarize, BenchConfig, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/desk_correlation.json"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pretext-eval-bench"));
    let cfg: BenchConfig = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let start = Instant::now();
    let report = run_benchmark(&cfg, &RunOptions::default())?;
    for r in &report.rows {
        let e = &r.estimates;
        println!(
            "{:<26} unl {:.3} unrel {:.3} inc {:.3} pred {:.3} semi {} self {}",
            r.task.to_string(),
            e.r_unlearnable,
            e.r_unreliable,
            e.r_incomplete,
            e.predicted_risk,
            r.actual_semi.map_or("-".into(), |v| format!("{v:.3}")),
            r.actual_self.map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
    let s = summarize(&report);
    for (p, r) in &s.pearson {
        println!("pearson {p}: {}", r.map_or("undefined".into(), |r| format!("{r:.3}")));
    }
    emit_report(&report, &out)?;
    println!("reports in {}, {:.1}s", out.display(), start.elapsed().as_secs_f64());
    Ok(())
}
