//! Trains the supervised baseline and both unlabeled-data pipelines on the
//! same synthetic world and compares their test errors.
//!
//! Usage: cargo run --release --example semi_vs_self [task]

use pretext_eval::augment::PretextTask;
use pretext_eval::models::{evaluate_error, train_supervised};
use pretext_eval::trainers::{actual_performance, Pipeline, SslConfig};
use pretext_eval::worlds::{gen_synthetic, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task: PretextTask = std::env::args().nth(1).unwrap_or("RandomHorizontalFlip:10".into()).parse()?;
    let world = gen_synthetic(&SynthSpec {
        noise: 0.3,
        classes_per_knowledge_cell: 2,
        unlabeled_per_class: 50,
        ..SynthSpec::default()
    })?;
    let cfg = SslConfig {
        consistency_weight: 10.0,
        ..SslConfig::default()
    };
    let baseline = train_supervised(&world.labeled, &cfg.train)?;
    println!("supervised only: {:.3}", evaluate_error(&baseline, &world.test)?);
    for p in Pipeline::ALL {
        let err = actual_performance(p, &world.labeled, &world.unlabeled, &world.test, &task, &cfg)?;
        println!("{p} with {task}: {err:.3}");
    }
    Ok(())
}
