//! Full training runs whose test error is the "actual" performance that
//! the estimators try to predict.
//!
//! Semi-supervised training mixes cross-entropy on labeled batches with the
//! consistency objective on unlabeled batches at every step. Self-supervised
//! training runs the consistency objective alone and then fine-tunes on the
//! labeled set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{Image, PretextTask};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{
    evaluate_error, fit_pretext, fit_supervised, init_model, labeled_step, view_pairs, BatchCycler, Gradient,
    MlpModel, Streams, TrainConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SslConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Weight of the consistency loss in the semi-supervised mix.
    pub consistency_weight: f64,
    /// Unlabeled batch size; `None` reuses `batch_size`.
    pub unlabeled_batch_size: Option<usize>,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    /// Fine-tune only the classification head.
    pub linear_probe: bool,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            consistency_weight: 1.0,
            unlabeled_batch_size: None,
            pretrain_epochs: 5,
            finetune_epochs: 5,
            linear_probe: false,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.consistency_weight >= 0.0 && self.consistency_weight.is_finite()) {
            return Err(Error::Config("consistency_weight must be finite and non-negative".into()));
        }
        if self.unlabeled_batch_size == Some(0) {
            return Err(Error::Config("unlabeled_batch_size must be at least 1".into()));
        }
        if self.finetune_epochs == 0 {
            return Err(Error::Config("finetune_epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            train: self.train.with_seed(seed),
            ..self.clone()
        }
    }

    pub fn unlabeled_batch(&self) -> usize {
        self.unlabeled_batch_size.unwrap_or(self.train.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Semi,
    #[serde(rename = "self")]
    SelfSupervised,
}

impl Pipeline {
    pub const ALL: [Pipeline; 2] = [Pipeline::Semi, Pipeline::SelfSupervised];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Semi => "semi",
            Pipeline::SelfSupervised => "self",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi" => Ok(Pipeline::Semi),
            "self" => Ok(Pipeline::SelfSupervised),
            _ => Err(Error::Config(format!("unknown pipeline {s:?}, expected semi or self"))),
        }
    }
}

/// Data-loss gradient of one semi-supervised step, without weight decay.
pub(crate) fn joint_gradient(
    model: &MlpModel,
    labeled: &Dataset,
    labels: &[usize],
    idx: &[usize],
    pairs: &[(Image, Image)],
    consistency_weight: f64,
) -> Result<(f64, Gradient)> {
    let (ce, mut g) = labeled_step(model, labeled, labels, idx, 0.0)?;
    if consistency_weight == 0.0 {
        return Ok((ce, g));
    }
    let (cons, gc) = model.consistency_grad(pairs, 0.0)?;
    g.add_scaled(&gc, consistency_weight);
    Ok((ce + consistency_weight * cons, g))
}

fn check_nonempty(labeled: &Dataset, unlabeled: &Dataset) -> Result<()> {
    if labeled.is_empty() {
        return Err(Error::EmptyDataset("labeled set"));
    }
    if unlabeled.is_empty() {
        return Err(Error::EmptyDataset("unlabeled set"));
    }
    if labeled.shape() != unlabeled.shape() {
        return Err(Error::Dimension("labeled and unlabeled image shapes differ".into()));
    }
    labeled.require_labels()?;
    Ok(())
}

/// Joint training; one epoch is one pass over the unlabeled set while
/// labeled batches cycle as needed.
pub fn train_semi_supervised(
    labeled: &Dataset,
    unlabeled: &Dataset,
    task: &PretextTask,
    cfg: &SslConfig,
) -> Result<MlpModel> {
    cfg.validate()?;
    check_nonempty(labeled, unlabeled)?;
    let labels = labeled.require_labels()?;
    let mut s = Streams::new(cfg.train.seed);
    let mut model = init_model(labeled, &cfg.train, &mut s.init)?;
    let mut opt = cfg.train.optimizer(model.num_params());
    let mut lab = BatchCycler::new(labeled.len(), cfg.train.batch_size, s.supervised_order);
    let mut unl = BatchCycler::new(unlabeled.len(), cfg.unlabeled_batch(), s.pretext_order);
    let steps = cfg.train.epochs * unl.batches_per_pass();
    for _ in 0..steps {
        let lidx = lab.next_batch().to_vec();
        let pairs = if cfg.consistency_weight == 0.0 {
            Vec::new()
        } else {
            view_pairs(unlabeled, unl.next_batch(), task, &mut s.views)
        };
        let (_, mut g) = joint_gradient(&model, labeled, labels, &lidx, &pairs, cfg.consistency_weight)?;
        model.add_weight_decay(cfg.train.weight_decay, &mut g.0);
        opt.step(&mut model, &g);
    }
    Ok(model)
}

/// Consistency pretraining on the unlabeled set followed by cross-entropy
/// fine-tuning on the labeled set, each with a fresh optimiser.
pub fn train_self_supervised(
    unlabeled: &Dataset,
    labeled: &Dataset,
    task: &PretextTask,
    cfg: &SslConfig,
) -> Result<MlpModel> {
    cfg.validate()?;
    check_nonempty(labeled, unlabeled)?;
    let mut s = Streams::new(cfg.train.seed);
    let mut model = init_model(labeled, &cfg.train, &mut s.init)?;
    let pre_cfg = TrainConfig {
        batch_size: cfg.unlabeled_batch(),
        ..cfg.train.clone()
    };
    fit_pretext(&mut model, unlabeled, task, &pre_cfg, cfg.pretrain_epochs, s.pretext_order, &mut s.views)?;
    let frozen = if cfg.linear_probe {
        model.encoder_param_count()
    } else {
        0
    };
    fit_supervised(&mut model, labeled, &cfg.train, cfg.finetune_epochs, s.supervised_order, frozen)?;
    Ok(model)
}

pub fn train_pipeline(
    pipeline: Pipeline,
    labeled: &Dataset,
    unlabeled: &Dataset,
    task: &PretextTask,
    cfg: &SslConfig,
) -> Result<MlpModel> {
    match pipeline {
        Pipeline::Semi => train_semi_supervised(labeled, unlabeled, task, cfg),
        Pipeline::SelfSupervised => train_self_supervised(unlabeled, labeled, task, cfg),
    }
}

/// Test error of the chosen pipeline trained on `labeled` and `unlabeled`.
pub fn actual_performance(
    pipeline: Pipeline,
    labeled: &Dataset,
    unlabeled: &Dataset,
    test: &Dataset,
    task: &PretextTask,
    cfg: &SslConfig,
) -> Result<f64> {
    let model = train_pipeline(pipeline, labeled, unlabeled, task, cfg)?;
    evaluate_error(&model, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Family;
    use crate::models::{train_pretext, train_supervised};
    use crate::rng::Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let mut imgs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let base = if y == 0 { 0.2 } else { 0.8 };
            let data: Vec<f32> = (0..12).map(|_| (base + 0.05 * rng.normal()) as f32).collect();
            imgs.push(Image::new(3, 2, 2, data).unwrap());
            labels.push(y);
        }
        Dataset::labeled(imgs, labels, 2).unwrap()
    }

    fn cfg() -> SslConfig {
        SslConfig {
            train: TrainConfig {
                batch_size: 8,
                epochs: 4,
                learning_rate: 0.01,
                weight_decay: 0.01,
                hidden_dims: vec![6, 4],
                seed: 17,
                ..TrainConfig::default()
            },
            pretrain_epochs: 3,
            finetune_epochs: 4,
            ..SslConfig::default()
        }
    }

    fn rotation() -> PretextTask {
        PretextTask::new(Family::RandomRotation, 6).unwrap()
    }

    #[test]
    fn zero_weight_matches_supervised() {
        let lab = blobs(16, 1);
        let unl = blobs(16, 2).without_labels();
        let c = SslConfig { consistency_weight: 0.0, ..cfg() };
        let semi = train_semi_supervised(&lab, &unl, &rotation(), &c).unwrap();
        let sup = train_supervised(&lab, &c.train).unwrap();
        assert_eq!(semi.params(), sup.params());
    }

    #[test]
    fn identity_task_matches_supervised() {
        let lab = blobs(16, 1);
        let unl = blobs(16, 2).without_labels();
        let task = PretextTask::new(Family::Translate, 0).unwrap();
        let semi = train_semi_supervised(&lab, &unl, &task, &cfg()).unwrap();
        let sup = train_supervised(&lab, &cfg().train).unwrap();
        assert_eq!(semi.params(), sup.params());
    }

    #[test]
    fn joint_gradient_is_the_sum_of_parts() {
        let lab = blobs(10, 3);
        let unl = blobs(6, 4);
        let model = init_model(&lab, &cfg().train, &mut Rng::new(5)).unwrap();
        let mut views = Rng::new(6);
        let pairs: Vec<(Image, Image)> = unl
            .images()
            .iter()
            .map(|x| crate::augment::sample_view_pair(x, &rotation(), &mut views))
            .collect();
        let idx: Vec<usize> = (0..10).collect();
        let labels = lab.require_labels().unwrap();
        let (_, joint) = joint_gradient(&model, &lab, labels, &idx, &pairs, 0.7).unwrap();
        let imgs: Vec<&Image> = lab.images().iter().collect();
        let (_, ce) = model.cross_entropy_grad(&imgs, labels, 0.0).unwrap();
        let (_, cons) = model.consistency_grad(&pairs, 0.0).unwrap();
        assert!(cons.norm() > 0.0);
        for ((j, a), b) in joint.as_slice().iter().zip(ce.as_slice()).zip(cons.as_slice()) {
            assert!((j - (a + 0.7 * b)).abs() <= 1e-6);
        }
    }

    #[test]
    fn pretraining_phase_matches_standalone_pretext_run() {
        let lab = blobs(12, 1);
        let unl = blobs(20, 2).without_labels();
        let c = cfg();
        let pre = train_pretext(&unl, &rotation(), &c.train.with_epochs(c.pretrain_epochs)).unwrap();
        // fine-tuning with the head only leaves the encoder exactly as pretrained
        let probe = SslConfig { linear_probe: true, ..c.clone() };
        let m = train_self_supervised(&unl, &lab, &rotation(), &probe).unwrap();
        let enc = m.encoder_param_count();
        assert_eq!(&m.params()[..enc], &pre.params()[..enc]);
        assert_ne!(&m.params()[enc..], &pre.params()[enc..]);
    }

    #[test]
    fn zero_pretraining_reduces_to_supervised() {
        let lab = blobs(12, 1);
        let unl = blobs(20, 2).without_labels();
        let c = SslConfig { pretrain_epochs: 0, ..cfg() };
        let m = train_self_supervised(&unl, &lab, &rotation(), &c).unwrap();
        let sup = train_supervised(&lab, &c.train.with_epochs(c.finetune_epochs)).unwrap();
        assert_eq!(m.params(), sup.params());
    }

    #[test]
    fn deterministic_per_seed() {
        let lab = blobs(12, 1);
        let unl = blobs(20, 2).without_labels();
        for p in Pipeline::ALL {
            let a = train_pipeline(p, &lab, &unl, &rotation(), &cfg()).unwrap();
            let b = train_pipeline(p, &lab, &unl, &rotation(), &cfg()).unwrap();
            assert_eq!(a.params(), b.params());
            let c = train_pipeline(p, &lab, &unl, &rotation(), &cfg().with_seed(99)).unwrap();
            assert_ne!(a.params(), c.params());
        }
    }

    #[test]
    fn separable_toy_is_learned_by_both_pipelines() {
        let lab = blobs(20, 1);
        let unl = blobs(60, 2).without_labels();
        let test = blobs(200, 3);
        let c = SslConfig {
            train: TrainConfig { epochs: 20, ..cfg().train },
            pretrain_epochs: 5,
            finetune_epochs: 40,
            ..cfg()
        };
        for p in Pipeline::ALL {
            let err = actual_performance(p, &lab, &unl, &test, &rotation(), &c).unwrap();
            assert!(err <= 0.05, "{p}: {err}");
        }
    }

    #[test]
    fn rejects_empty_sets_and_bad_weights() {
        let lab = blobs(4, 1);
        let empty = lab.select(&[]);
        for p in Pipeline::ALL {
            assert!(matches!(
                train_pipeline(p, &lab, &empty, &rotation(), &cfg()),
                Err(Error::EmptyDataset(_))
            ));
            assert!(matches!(
                train_pipeline(p, &empty, &lab, &rotation(), &cfg()),
                Err(Error::EmptyDataset(_))
            ));
        }
        let bad = SslConfig { consistency_weight: -1.0, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = SslConfig { consistency_weight: f64::NAN, ..cfg() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_is_flat() {
        let c = SslConfig::default();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["learning_rate"], 5e-5);
        assert_eq!(v["consistency_weight"], 1.0);
        let back: SslConfig = serde_json::from_str(r#"{"epochs": 2, "consistency_weight": 0.5}"#).unwrap();
        assert_eq!(back.train.epochs, 2);
        assert_eq!(back.train.batch_size, 64);
        assert_eq!(back.consistency_weight, 0.5);
        assert_eq!("self".parse::<Pipeline>().unwrap(), Pipeline::SelfSupervised);
        assert_eq!(serde_json::to_string(&Pipeline::SelfSupervised).unwrap(), "\"self\"");
    }
}
