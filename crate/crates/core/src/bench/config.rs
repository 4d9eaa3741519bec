use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{task_grid, PretextTask};
use crate::dataset::{read_dataset, Dataset};
use crate::error::{Error, Result};
use crate::knowledge::SatisfactionParams;
use crate::models::TrainConfig;
use crate::rng::{label_key, derive_seed, Rng};
use crate::trainers::{Pipeline, SslConfig};
use crate::worlds::{gen_synthetic, SynthSpec};

/// Where the labeled pool, unlabeled pool and test set come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SynthSpec),
    Files {
        labeled: PathBuf,
        unlabeled: PathBuf,
        test: PathBuf,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthSpec::default())
    }
}

/// One benchmark run. Every field takes part in the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub data: DataSource,
    pub pipelines: Vec<Pipeline>,
    /// `"all"` or a comma-separated list of `Family:strength` names.
    pub tasks: String,
    /// Labeled examples per class, used for estimation and for training.
    pub labeled_per_class: usize,
    /// Unlabeled examples per class in the estimation sample.
    pub unlabeled_per_class: usize,
    pub estimation: TrainConfig,
    pub satisfaction: SatisfactionParams,
    pub training: SslConfig,
    /// Independent training runs per task and pipeline; the reported test
    /// error is their mean.
    pub training_repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataSource::default(),
            pipelines: Pipeline::ALL.to_vec(),
            tasks: "all".into(),
            labeled_per_class: 5,
            unlabeled_per_class: 50,
            estimation: TrainConfig::default(),
            satisfaction: SatisfactionParams::default(),
            training: SslConfig::default(),
            training_repeats: 1,
        }
    }
}

/// Parses `"all"` or comma-separated task names into canonical grid order.
pub fn parse_task_list(list: &str) -> Result<Vec<PretextTask>> {
    let list = list.trim();
    if list == "all" {
        return Ok(task_grid());
    }
    let mut tasks = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<PretextTask>>>()?;
    if tasks.is_empty() {
        return Err(Error::Task("empty task list".into()));
    }
    tasks.sort_by_key(PretextTask::grid_index);
    tasks.dedup();
    Ok(tasks)
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pipelines.is_empty() {
            return Err(Error::Config("at least one pipeline is required".into()));
        }
        if self.training_repeats == 0 {
            return Err(Error::Config("training_repeats must be at least 1".into()));
        }
        if self.labeled_per_class == 0 || self.unlabeled_per_class == 0 {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        self.estimation.validate()?;
        self.satisfaction.validate()?;
        self.training.validate()?;
        parse_task_list(&self.tasks)?;
        Ok(())
    }

    pub fn task_list(&self) -> Result<Vec<PretextTask>> {
        parse_task_list(&self.tasks)
    }

    pub fn runs(&self, pipeline: Pipeline) -> bool {
        self.pipelines.contains(&pipeline)
    }

    /// Hex SHA-256 of the config's canonical JSON (object keys sorted).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let canonical = serde_json::to_string(&value).expect("value serialises");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Seed of the full training runs for one task.
    pub fn training_seed(&self, task: &PretextTask) -> u64 {
        derive_seed(derive_seed(self.seed, label_key("training")), task.grid_index() as u64)
    }

    /// One seed per training repeat; the first is `training_seed`.
    pub fn training_seeds(&self, task: &PretextTask) -> Vec<u64> {
        let base = self.training_seed(task);
        (0..self.training_repeats as u64)
            .map(|r| if r == 0 { base } else { derive_seed(base, r) })
            .collect()
    }
}

/// The three data sets a benchmark reads, plus the estimation samples.
#[derive(Debug, Clone)]
pub struct BenchData {
    /// `labeled_per_class` examples of each class.
    pub labeled: Dataset,
    pub unlabeled: Dataset,
    pub test: Dataset,
    /// Random subset of `unlabeled` used for estimation.
    pub estimation_sample: Dataset,
}

impl BenchData {
    pub fn load(cfg: &BenchConfig) -> Result<Self> {
        let (labeled_pool, unlabeled, test) = match &cfg.data {
            DataSource::Synthetic(spec) => {
                let w = gen_synthetic(spec)?;
                (w.labeled, w.unlabeled, w.test)
            }
            DataSource::Files { labeled, unlabeled, test } => {
                (read_dataset(labeled)?, read_dataset(unlabeled)?.without_labels(), read_dataset(test)?)
            }
        };
        Self::from_pools(cfg, labeled_pool, unlabeled, test)
    }

    pub fn from_pools(cfg: &BenchConfig, labeled_pool: Dataset, unlabeled: Dataset, test: Dataset) -> Result<Self> {
        if labeled_pool.shape() != unlabeled.shape() || labeled_pool.shape() != test.shape() {
            return Err(Error::Dimension("labeled, unlabeled and test image shapes differ".into()));
        }
        if unlabeled.is_empty() {
            return Err(Error::EmptyDataset("unlabeled pool"));
        }
        if test.is_empty() {
            return Err(Error::EmptyDataset("test set"));
        }
        test.require_labels()?;
        let labeled = labeled_pool.take_per_class(cfg.labeled_per_class)?;
        labeled.check_coverage()?;
        let want = (cfg.unlabeled_per_class * labeled.num_classes()).min(unlabeled.len());
        let mut rng = Rng::new(derive_seed(cfg.seed, label_key("estimation-sample")));
        let mut idx = rand::seq::index::sample(&mut rng, unlabeled.len(), want).into_vec();
        idx.sort_unstable();
        let estimation_sample = unlabeled.select(&idx);
        Ok(Self {
            labeled,
            unlabeled,
            test,
            estimation_sample,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Family;

    #[test]
    fn task_lists() {
        assert_eq!(parse_task_list("all").unwrap().len(), 115);
        let t = parse_task_list("Hue:3, RandomRotation:2,Hue:3").unwrap();
        assert_eq!(
            t,
            vec![
                PretextTask::new(Family::RandomRotation, 2).unwrap(),
                PretextTask::new(Family::Hue, 3).unwrap()
            ]
        );
        assert!(parse_task_list("Hue:9").is_err());
        assert!(parse_task_list(" , ").is_err());
    }

    #[test]
    fn hash_tracks_semantic_fields() {
        let a = BenchConfig::default();
        assert_eq!(a.hash(), BenchConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
        let mut b = a.clone();
        b.training.consistency_weight = 0.5;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.tasks = "Hue:1".into();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: BenchConfig = serde_json::from_str(
            r#"{"seed": 3, "data": {"kind": "synthetic", "num_classes": 3}, "training": {"epochs": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.training.train.epochs, 2);
        assert_eq!(cfg.training.consistency_weight, 1.0);
        match cfg.data {
            DataSource::Synthetic(s) => assert_eq!((s.num_classes, s.height), (3, 8)),
            _ => panic!("expected synthetic data"),
        }
        assert_eq!(cfg.estimation.batch_size, 64);
    }

    #[test]
    fn estimation_sample_is_a_subset_of_the_pool() {
        let cfg = BenchConfig {
            data: DataSource::Synthetic(SynthSpec { unlabeled_per_class: 30, test_per_class: 5, ..SynthSpec::default() }),
            unlabeled_per_class: 10,
            ..BenchConfig::default()
        };
        let d = BenchData::load(&cfg).unwrap();
        assert_eq!(d.estimation_sample.len(), 40);
        assert_eq!(d.labeled.class_counts().unwrap(), vec![5; 4]);
        for x in d.estimation_sample.images() {
            assert!(d.unlabeled.images().contains(x));
            assert!(!d.labeled.images().contains(x));
        }
    }
}
