//! Predict, before any large-scale training, how much an unsupervised
//! pretext task will help a downstream classification task.

pub mod augment;
pub mod bench;
pub mod cli;
pub mod dataset;
pub mod estimators;
pub mod error;
pub mod knowledge;
pub mod models;
pub mod numerics;
pub mod rng;
pub mod trainers;
pub mod worlds;

pub use error::{Error, Result};
