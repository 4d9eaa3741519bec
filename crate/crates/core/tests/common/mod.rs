#![allow(dead_code)]

use pretext_eval::bench::{BenchConfig, DataSource};
use pretext_eval::models::TrainConfig;
use pretext_eval::trainers::SslConfig;
use pretext_eval::worlds::SynthSpec;

/// A benchmark small enough to run in a few seconds.
pub fn tiny_config(tasks: &str) -> BenchConfig {
    let train = TrainConfig {
        learning_rate: 1e-3,
        epochs: 3,
        batch_size: 16,
        hidden_dims: vec![16, 8],
        ..TrainConfig::default()
    };
    BenchConfig {
        seed: 9,
        data: DataSource::Synthetic(SynthSpec {
            unlabeled_per_class: 20,
            test_per_class: 20,
            invariant_class_fraction: 0.5,
            noise: 0.2,
            seed: 9,
            ..SynthSpec::default()
        }),
        tasks: tasks.into(),
        unlabeled_per_class: 10,
        estimation: train.clone(),
        training: SslConfig {
            train,
            pretrain_epochs: 2,
            finetune_epochs: 2,
            ..SslConfig::default()
        },
        ..BenchConfig::default()
    }
}

pub const FOUR_TASKS: &str = "RandomRotation:0,RandomRotation:6,Brightness:3,RandomHorizontalFlip:5";

/// Pearson r by the textbook two-pass formula, kept separate from the
/// library's implementation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}
