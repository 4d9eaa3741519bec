use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradient, MlpModel};
use super::optim::Adam;
use crate::augment::{sample_view_pair, Image, PretextTask};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knowledge::Labeler;
use crate::rng::Rng;

/// Optimisation settings shared by every training routine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Encoder widths; the last entry is the embedding dimension.
    pub hidden_dims: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 5,
            learning_rate: 5e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            hidden_dims: vec![128, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::Config("need at least one encoder layer".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_epochs(&self, epochs: usize) -> Self {
        Self {
            epochs,
            ..self.clone()
        }
    }

    pub(crate) fn dims(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(&self.hidden_dims);
        dims.push(classes);
        dims
    }

    pub(crate) fn optimizer(&self, num_params: usize) -> Adam {
        Adam::new(num_params, self.learning_rate, self.beta1, self.beta2, self.epsilon)
    }
}

/// Named random streams derived from one training seed.
pub(crate) struct Streams {
    pub init: Rng,
    pub supervised_order: Rng,
    pub pretext_order: Rng,
    pub views: Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let root = Rng::new(seed);
        Self {
            init: root.fork_named("init"),
            supervised_order: root.fork_named("supervised-order"),
            pretext_order: root.fork_named("pretext-order"),
            views: root.fork_named("views"),
        }
    }
}

/// Endless mini-batches over `0..len`, reshuffled (Fisher-Yates) each pass.
pub(crate) struct BatchCycler {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: Rng,
}

impl BatchCycler {
    pub fn new(len: usize, batch: usize, rng: Rng) -> Self {
        Self {
            order: (0..len).collect(),
            pos: len,
            batch,
            rng,
        }
    }

    pub fn batches_per_pass(&self) -> usize {
        self.order.len().div_ceil(self.batch)
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.pos >= self.order.len() {
            self.order.sort_unstable();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let out = &self.order[self.pos..end];
        self.pos = end;
        out
    }
}

pub(crate) fn init_model(data: &Dataset, cfg: &TrainConfig, rng: &mut Rng) -> Result<MlpModel> {
    if data.num_classes() < 1 {
        return Err(Error::Config("dataset declares no classes".into()));
    }
    MlpModel::init(cfg.dims(data.input_dim(), data.num_classes()), rng)
}

pub(crate) fn labeled_step(
    model: &MlpModel,
    data: &Dataset,
    labels: &[usize],
    idx: &[usize],
    weight_decay: f64,
) -> Result<(f64, Gradient)> {
    let imgs: Vec<&Image> = idx.iter().map(|&i| &data.images()[i]).collect();
    let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    model.cross_entropy_grad(&imgs, &ys, weight_decay)
}

pub(crate) fn view_pairs(data: &Dataset, idx: &[usize], task: &PretextTask, views: &mut Rng) -> Vec<(Image, Image)> {
    idx.iter()
        .map(|&i| sample_view_pair(&data.images()[i], task, views))
        .collect()
}

/// Supervised cross-entropy fit of an existing model. Returns the mean
/// data loss of every epoch.
pub(crate) fn fit_supervised(
    model: &mut MlpModel,
    data: &Dataset,
    cfg: &TrainConfig,
    epochs: usize,
    order: Rng,
    trainable_from: usize,
) -> Result<Vec<f64>> {
    let labels = data.require_labels()?;
    let mut opt = cfg.optimizer(model.num_params());
    let mut cycler = BatchCycler::new(data.len(), cfg.batch_size, order);
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut total = 0.0;
        for _ in 0..cycler.batches_per_pass() {
            let idx = cycler.next_batch().to_vec();
            let (loss, mut g) = labeled_step(model, data, labels, &idx, 0.0)?;
            model.add_weight_decay(cfg.weight_decay, &mut g.0);
            g.0[..trainable_from].iter_mut().for_each(|v| *v = 0.0);
            opt.step(model, &g);
            total += loss * idx.len() as f64;
        }
        history.push(total / data.len() as f64);
    }
    Ok(history)
}

/// Consistency fit on freshly drawn view pairs. Returns the mean
/// consistency loss of every epoch.
pub(crate) fn fit_pretext(
    model: &mut MlpModel,
    data: &Dataset,
    task: &PretextTask,
    cfg: &TrainConfig,
    epochs: usize,
    order: Rng,
    views: &mut Rng,
) -> Result<Vec<f64>> {
    let mut opt = cfg.optimizer(model.num_params());
    let mut cycler = BatchCycler::new(data.len(), cfg.batch_size, order);
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut total = 0.0;
        for _ in 0..cycler.batches_per_pass() {
            let idx = cycler.next_batch().to_vec();
            let pairs = view_pairs(data, &idx, task, views);
            let (loss, mut g) = model.consistency_grad(&pairs, 0.0)?;
            model.add_weight_decay(cfg.weight_decay, &mut g.0);
            opt.step(model, &g);
            total += loss * idx.len() as f64;
        }
        history.push(total / data.len() as f64);
    }
    Ok(history)
}

/// Trains a fresh model with cross-entropy; also returns per-epoch loss.
pub fn train_supervised_with_history(labeled: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::EmptyDataset("supervised training set"));
    }
    labeled.require_labels()?;
    if labeled.check_coverage().is_err() {
        log::warn!("some classes have no labeled example");
    }
    let mut s = Streams::new(cfg.seed);
    let mut model = init_model(labeled, cfg, &mut s.init)?;
    let history = fit_supervised(&mut model, labeled, cfg, cfg.epochs, s.supervised_order, 0)?;
    Ok((model, history))
}

/// Trains a fresh model with cross-entropy on the labeled set.
pub fn train_supervised(labeled: &Dataset, cfg: &TrainConfig) -> Result<MlpModel> {
    train_supervised_with_history(labeled, cfg).map(|(m, _)| m)
}

/// Trains a fresh model on the consistency objective of `task`; also
/// returns per-epoch loss.
pub fn train_pretext_with_history(
    unlabeled: &Dataset,
    task: &PretextTask,
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    if unlabeled.is_empty() {
        return Err(Error::EmptyDataset("pretext training set"));
    }
    let mut s = Streams::new(cfg.seed);
    let mut model = init_model(unlabeled, cfg, &mut s.init)?;
    let history = fit_pretext(&mut model, unlabeled, task, cfg, cfg.epochs, s.pretext_order, &mut s.views)?;
    Ok((model, history))
}

/// Trains a fresh model on the consistency objective of `task`.
pub fn train_pretext(unlabeled: &Dataset, task: &PretextTask, cfg: &TrainConfig) -> Result<MlpModel> {
    train_pretext_with_history(unlabeled, task, cfg).map(|(m, _)| m)
}

/// Fraction of `test` that `labeler` gets wrong.
pub fn evaluate_error(labeler: &(impl Labeler + ?Sized), test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("test set"));
    }
    let labels = test.require_labels()?;
    let wrong = test
        .images()
        .iter()
        .zip(labels)
        .filter(|(img, &y)| labeler.predict(img) != y)
        .count();
    Ok(wrong as f64 / test.len() as f64)
}
