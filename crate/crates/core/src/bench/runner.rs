use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, BenchData};
use crate::augment::PretextTask;
use crate::error::{Error, Result};
use crate::estimators::{Estimator, IndicatorEstimates};
use crate::trainers::{actual_performance, Pipeline};

/// Everything measured for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: PretextTask,
    pub estimates: IndicatorEstimates,
    pub actual_semi: Option<f64>,
    pub actual_self: Option<f64>,
    /// Wall-clock seconds; kept out of the report so it stays reproducible.
    pub seconds: f64,
}

impl TaskRow {
    pub fn actual(&self, pipeline: Pipeline) -> Option<f64> {
        match pipeline {
            Pipeline::Semi => self.actual_semi,
            Pipeline::SelfSupervised => self.actual_self,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Append finished rows here and skip rows already present.
    pub checkpoint: Option<PathBuf>,
    /// Stop after this many newly finished tasks.
    pub max_new_tasks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub seed: u64,
    pub config: BenchConfig,
    /// Finished tasks in grid order.
    pub rows: Vec<TaskRow>,
    /// Whether every requested task has a row.
    pub complete: bool,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config_hash: String,
}

fn load_checkpoint(path: &Path, hash: &str) -> Result<Vec<TaskRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header: CheckpointHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Ok(Vec::new()),
    };
    if header.config_hash != hash {
        log::warn!("checkpoint {} belongs to another config; starting over", path.display());
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        // a torn final line from an interrupted write is dropped
        match serde_json::from_str::<TaskRow>(&line) {
            Ok(row) => rows.push(row),
            Err(_) => break,
        }
    }
    Ok(rows)
}

fn rewrite_checkpoint(path: &Path, hash: &str, rows: &[TaskRow]) -> Result<File> {
    let mut f = File::create(path)?;
    writeln!(f, "{}", serde_json::to_string(&CheckpointHeader { config_hash: hash.into() })?)?;
    for r in rows {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    f.flush()?;
    drop(f);
    Ok(OpenOptions::new().append(true).open(path)?)
}

/// Estimates and full-training errors for one task.
pub fn run_task(cfg: &BenchConfig, data: &BenchData, estimator: &Estimator, task: &PretextTask) -> Result<TaskRow> {
    let start = Instant::now();
    let estimates = estimator.estimate(&data.estimation_sample, task)?;
    let seeds = cfg.training_seeds(task);
    let actual = |p: Pipeline| -> Result<Option<f64>> {
        if !cfg.runs(p) {
            return Ok(None);
        }
        let mut total = 0.0;
        for &seed in &seeds {
            total += actual_performance(p, &data.labeled, &data.unlabeled, &data.test, task, &cfg.training.with_seed(seed))?;
        }
        Ok(Some(total / seeds.len() as f64))
    };
    let actual_semi = actual(Pipeline::Semi)?;
    let actual_self = actual(Pipeline::SelfSupervised)?;
    Ok(TaskRow {
        task: *task,
        estimates,
        actual_semi,
        actual_self,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every requested task, resuming from and appending to the
/// checkpoint when one is given. Results do not depend on thread count or
/// scheduling.
pub fn run_benchmark(cfg: &BenchConfig, opts: &RunOptions) -> Result<BenchReport> {
    cfg.validate()?;
    let data = BenchData::load(cfg)?;
    run_benchmark_on(cfg, &data, opts)
}

pub fn run_benchmark_on(cfg: &BenchConfig, data: &BenchData, opts: &RunOptions) -> Result<BenchReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let tasks = cfg.task_list()?;
    let mut done = match &opts.checkpoint {
        Some(p) => load_checkpoint(p, &hash)?,
        None => Vec::new(),
    };
    done.retain(|r| tasks.contains(&r.task));
    let sink = match &opts.checkpoint {
        Some(p) => Some(Mutex::new(rewrite_checkpoint(p, &hash, &done)?)),
        None => None,
    };
    let mut pending: Vec<PretextTask> = tasks.iter().filter(|t| !done.iter().any(|r| r.task == **t)).copied().collect();
    if let Some(k) = opts.max_new_tasks {
        pending.truncate(k);
    }
    if !pending.is_empty() {
        let estimator = Estimator::new(data.labeled.clone(), cfg.estimation.clone(), cfg.satisfaction, cfg.seed)?;
        let work = || -> Result<Vec<TaskRow>> {
            pending
                .par_iter()
                .map(|task| {
                    let row = run_task(cfg, data, &estimator, task)?;
                    log::info!("{task}: predicted {:.4}", row.estimates.predicted_risk);
                    if let Some(sink) = &sink {
                        let line = serde_json::to_string(&row)?;
                        let mut f = sink.lock().map_err(|_| Error::Config("checkpoint lock poisoned".into()))?;
                        writeln!(f, "{line}")?;
                        f.flush()?;
                    }
                    Ok(row)
                })
                .collect()
        };
        let fresh = match opts.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(work)?,
            None => work()?,
        };
        done.extend(fresh);
    }
    done.sort_by_key(|r| r.task.grid_index());
    Ok(BenchReport {
        config_hash: hash,
        seed: cfg.seed,
        config: cfg.clone(),
        complete: done.len() == tasks.len(),
        rows: done,
    })
}
