//! Estimates the three indicators and the predicted risk for a few tasks
//! on a synthetic world, then prints them as JSON lines.
//!
//! Usage: cargo run --release --example estimate_indicators [task ...]

use pretext_eval::augment::PretextTask;
use pretext_eval::bench::{BenchConfig, BenchData, DataSource};
use pretext_eval::estimators::Estimator;
use pretext_eval::worlds::SynthSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tasks: Vec<PretextTask> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    if tasks.is_empty() {
        tasks = ["RandomRotation:0", "RandomHorizontalFlip:10", "RandomRotation:9", "ColorJitterHue:10"]
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?;
    }
    let cfg = BenchConfig {
        data: DataSource::Synthetic(SynthSpec {
            invariant_class_fraction: 0.5,
            ..SynthSpec::default()
        }),
        ..BenchConfig::default()
    };
    let data = BenchData::load(&cfg)?;
    let est = Estimator::new(data.labeled.clone(), cfg.estimation.clone(), cfg.satisfaction, cfg.seed)?;
    for task in &tasks {
        let e = est.estimate(&data.estimation_sample, task)?;
        println!("{{\"task\":\"{task}\",\"estimates\":{}}}", serde_json::to_string(&e)?);
    }
    Ok(())
}
