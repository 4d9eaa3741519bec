//! Small-sample estimates of knowledge learnability, reliability and
//! completeness, and the target risk they predict.
//!
//! The pipeline filters the unlabeled sample in three stages:
//!
//! 1. a model trained only on the pretext objective is checked for
//!    consistency on every sample (unlearnable rate, learnable subset);
//! 2. a proxy trained on the labeled set stands in for the true labels and
//!    is checked for consistency on the learnable subset (unreliable rate,
//!    reliable subset);
//! 3. the pretext encoder is aligned to the target classes with class
//!    prototypes and compared against the proxy on the reliable subset
//!    (incomplete rate).
//!
//! Any rate whose conditioning set is empty is 0.
//!
//! Augmentation randomness for a sample is keyed on the stage seed and the
//! sample's pixel content, so verdicts do not depend on sample order.

use serde::{Deserialize, Serialize};

use crate::augment::{Image, PretextTask};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knowledge::{label_satisfies, model_satisfies, Labeler, SatisfactionParams};
use crate::models::{build_prototype_classifier, train_pretext, train_supervised, AlignedModel, MlpModel, TrainConfig};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEstimates {
    pub r_unlearnable: f64,
    pub r_unreliable: f64,
    pub r_incomplete: f64,
    pub predicted_risk: f64,
    pub sample_count: usize,
    pub learnable_count: usize,
    pub reliable_count: usize,
}

/// Stable 64-bit key for an image's pixel content.
pub fn image_key(img: &Image) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for d in img.shape() {
        h = derive_seed(h, d as u64);
    }
    for v in img.data() {
        h = (h ^ v.to_bits() as u64).wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

fn sample_rng(stage: &Rng, img: &Image) -> Rng {
    stage.fork(image_key(img))
}

fn rate(bad: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Fraction of `sample` on which `pretext_model` is inconsistent, and the
/// consistent examples in their original order.
pub fn estimate_unlearnable(
    pretext_model: &(impl Labeler + ?Sized),
    sample: &Dataset,
    task: &PretextTask,
    params: &SatisfactionParams,
    rng: &Rng,
) -> Result<(f64, Dataset)> {
    if sample.is_empty() {
        return Err(Error::EmptyDataset("unlabeled estimation sample"));
    }
    params.validate()?;
    let stage = rng.fork_named("unlearnable");
    let keep: Vec<usize> = (0..sample.len())
        .filter(|&i| {
            let x = &sample.images()[i];
            model_satisfies(pretext_model, x, task, params, &mut sample_rng(&stage, x))
        })
        .collect();
    let r = rate(sample.len() - keep.len(), sample.len());
    Ok((r, sample.select(&keep)))
}

/// Fraction of `learnable` on which the proxy labels violate the
/// knowledge, and the examples where they do not.
pub fn estimate_unreliable(
    proxy: &(impl Labeler + ?Sized),
    learnable: &Dataset,
    task: &PretextTask,
    params: &SatisfactionParams,
    rng: &Rng,
) -> Result<(f64, Dataset)> {
    params.validate()?;
    let stage = rng.fork_named("unreliable");
    let keep: Vec<usize> = (0..learnable.len())
        .filter(|&i| {
            let x = &learnable.images()[i];
            label_satisfies(proxy, x, task, params, &mut sample_rng(&stage, x))
        })
        .collect();
    let r = rate(learnable.len() - keep.len(), learnable.len());
    Ok((r, learnable.select(&keep)))
}

/// Fraction of `reliable` where the proxy and the aligned pretext model
/// disagree.
pub fn estimate_incomplete(
    proxy: &(impl Labeler + ?Sized),
    aligned_pretext: &(impl Labeler + ?Sized),
    reliable: &Dataset,
) -> f64 {
    let bad = reliable
        .images()
        .iter()
        .filter(|x| proxy.predict(x) != aligned_pretext.predict(x))
        .count();
    rate(bad, reliable.len())
}

/// `1 - (1 - r_unlearnable)(1 - r_unreliable)(1 - r_incomplete)`.
pub fn predict_target_risk(r_unlearnable: f64, r_unreliable: f64, r_incomplete: f64) -> Result<f64> {
    for (name, value) in [
        ("r_unlearnable", r_unlearnable),
        ("r_unreliable", r_unreliable),
        ("r_incomplete", r_incomplete),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Rate { name, value });
        }
    }
    Ok(1.0 - (1.0 - r_unlearnable) * (1.0 - r_unreliable) * (1.0 - r_incomplete))
}

/// Runs the three filtering stages for one task given already trained
/// models.
pub fn estimate_with_models(
    pretext_model: &MlpModel,
    proxy: &(impl Labeler + ?Sized),
    labeled: &Dataset,
    sample: &Dataset,
    task: &PretextTask,
    params: &SatisfactionParams,
    rng: &Rng,
) -> Result<IndicatorEstimates> {
    let (r_unlearnable, learnable) = estimate_unlearnable(pretext_model, sample, task, params, rng)?;
    let (r_unreliable, reliable) = estimate_unreliable(proxy, &learnable, task, params, rng)?;
    let aligned: AlignedModel = build_prototype_classifier(pretext_model, labeled)?;
    let r_incomplete = estimate_incomplete(proxy, &aligned, &reliable);
    Ok(IndicatorEstimates {
        predicted_risk: predict_target_risk(r_unlearnable, r_unreliable, r_incomplete)?,
        r_unlearnable,
        r_unreliable,
        r_incomplete,
        sample_count: sample.len(),
        learnable_count: learnable.len(),
        reliable_count: reliable.len(),
    })
}

/// Holds the labeled-set proxy so it can be reused across tasks.
#[derive(Debug, Clone)]
pub struct Estimator {
    labeled: Dataset,
    proxy: MlpModel,
    cfg: TrainConfig,
    params: SatisfactionParams,
    seed: u64,
}

impl Estimator {
    /// Trains the proxy on `labeled`, which must cover every class.
    pub fn new(labeled: Dataset, cfg: TrainConfig, params: SatisfactionParams, seed: u64) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if labeled.is_empty() {
            return Err(Error::EmptyDataset("labeled set"));
        }
        labeled.check_coverage()?;
        let proxy = train_supervised(&labeled, &cfg.with_seed(derive_seed(seed, 0x9e0)))?;
        Ok(Self {
            labeled,
            proxy,
            cfg,
            params,
            seed,
        })
    }

    pub fn proxy(&self) -> &MlpModel {
        &self.proxy
    }

    /// Seed for one task, keyed on its position in the full task grid.
    pub fn task_seed(&self, task: &PretextTask) -> u64 {
        derive_seed(self.seed, 1 + task.grid_index() as u64)
    }

    pub fn pretext_model(&self, sample: &Dataset, task: &PretextTask) -> Result<MlpModel> {
        train_pretext(sample, task, &self.cfg.with_seed(self.task_seed(task)))
    }

    pub fn estimate(&self, sample: &Dataset, task: &PretextTask) -> Result<IndicatorEstimates> {
        if sample.is_empty() {
            return Err(Error::EmptyDataset("unlabeled estimation sample"));
        }
        let pretext = self.pretext_model(sample, task)?;
        let rng = Rng::new(self.task_seed(task)).fork_named("satisfaction");
        estimate_with_models(&pretext, &self.proxy, &self.labeled, sample, task, &self.params, &rng)
    }
}

/// Full estimation for one task: pretext training, the three filters,
/// proxy training, prototype alignment and the combined risk.
pub fn run_estimation_pipeline(
    labeled: &Dataset,
    unlabeled_sample: &Dataset,
    task: &PretextTask,
    cfg: &TrainConfig,
    params: &SatisfactionParams,
    seed: u64,
) -> Result<IndicatorEstimates> {
    Estimator::new(labeled.clone(), cfg.clone(), *params, seed)?.estimate(unlabeled_sample, task)
}
