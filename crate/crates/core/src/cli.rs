//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! or configuration error, 3 internal invariant violation.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bench::{emit_report, run_benchmark, summarize, BenchConfig, BenchData, DataSource, RunOptions};
use crate::dataset::write_dataset;
use crate::error::Error;
use crate::estimators::{Estimator, IndicatorEstimates};
use crate::models::{evaluate_error, save_model};
use crate::trainers::{train_pipeline, Pipeline};
use crate::worlds::{gen_synthetic, sweep, SweepConfig, SynthSpec, BOUND_SLACK};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pretext-eval", version, about = "Predict how much a pretext task helps a target task")]
struct Cli {
    /// Run seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// "all" or comma-separated task names such as RandomRotation:7.
    #[arg(long, global = true)]
    tasks: Option<String>,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Labeled pool (KPD1); replaces the configured data source.
    #[arg(long, requires_all = ["unlabeled", "test"])]
    labeled: Option<PathBuf>,
    #[arg(long, requires_all = ["labeled", "test"])]
    unlabeled: Option<PathBuf>,
    #[arg(long, requires_all = ["labeled", "unlabeled"])]
    test: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Indicator estimates and predicted risk as JSON.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one pipeline on one task and report its test error.
    TrainSsl {
        #[arg(long, default_value = "semi")]
        pipeline: Pipeline,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Estimates and full training for every task, with reports.
    Bench {
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Ignore any checkpoint in the output directory.
        #[arg(long)]
        fresh: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Exhaustive bound checks over random finite worlds.
    VerifyBounds {
        #[arg(long)]
        worlds: Option<usize>,
        #[arg(long)]
        max_inputs: Option<usize>,
        #[arg(long)]
        max_labels: Option<usize>,
        #[arg(long)]
        triples: Option<usize>,
    },
    /// Write a synthetic world as KPD1 files.
    GenSynth,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Rate { .. } => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Error> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn print_json(v: &impl Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn bench_config(cli: &Cli, data: &DataArgs) -> Result<BenchConfig, Error> {
    let mut cfg: BenchConfig = load_json(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = &cli.tasks {
        cfg.tasks = t.clone();
    }
    if let (Some(l), Some(u), Some(t)) = (&data.labeled, &data.unlabeled, &data.test) {
        cfg.data = DataSource::Files {
            labeled: l.clone(),
            unlabeled: u.clone(),
            test: t.clone(),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct TaskEstimate {
    task: String,
    #[serde(flatten)]
    estimates: IndicatorEstimates,
}

fn estimate(cli: &Cli, data: &DataArgs) -> Result<i32, Error> {
    let cfg = bench_config(cli, data)?;
    let d = BenchData::load(&cfg)?;
    let est = Estimator::new(d.labeled.clone(), cfg.estimation.clone(), cfg.satisfaction, cfg.seed)?;
    let mut out = Vec::new();
    for task in cfg.task_list()? {
        log::info!("estimating {task}");
        out.push(TaskEstimate {
            task: task.to_string(),
            estimates: est.estimate(&d.estimation_sample, &task)?,
        });
    }
    if out.len() == 1 {
        print_json(&out[0])?;
    } else {
        print_json(&out)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TrainResult {
    task: String,
    pipeline: Pipeline,
    test_error: f64,
    config_hash: String,
}

fn train_ssl(cli: &Cli, pipeline: Pipeline, data: &DataArgs) -> Result<i32, Error> {
    let cfg = bench_config(cli, data)?;
    let tasks = cfg.task_list()?;
    let [task] = tasks.as_slice() else {
        eprintln!("train-ssl needs exactly one task in --tasks");
        return Ok(EXIT_USAGE);
    };
    let d = BenchData::load(&cfg)?;
    let training = cfg.training.with_seed(cfg.training_seed(task));
    let model = train_pipeline(pipeline, &d.labeled, &d.unlabeled, task, &training)?;
    let test_error = evaluate_error(&model, &d.test)?;
    if let Some(out) = &cli.out {
        fs::create_dir_all(out)?;
        save_model(out.join("model.kpm"), &model)?;
    }
    print_json(&TrainResult {
        task: task.to_string(),
        pipeline,
        test_error,
        config_hash: cfg.hash(),
    })?;
    Ok(EXIT_OK)
}

fn bench(cli: &Cli, threads: Option<usize>, fresh: bool, data: &DataArgs) -> Result<i32, Error> {
    let cfg = bench_config(cli, data)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("bench-out"));
    fs::create_dir_all(&out)?;
    let checkpoint = out.join("checkpoint.jsonl");
    if fresh && checkpoint.exists() {
        fs::remove_file(&checkpoint)?;
    }
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
    let opts = RunOptions {
        threads,
        checkpoint: Some(checkpoint),
        max_new_tasks: None,
    };
    let report = run_benchmark(&cfg, &opts)?;
    for path in emit_report(&report, &out)? {
        log::info!("wrote {}", path.display());
    }
    print_json(&summarize(&report))?;
    Ok(EXIT_OK)
}

fn verify_bounds(
    cli: &Cli,
    worlds: Option<usize>,
    max_inputs: Option<usize>,
    max_labels: Option<usize>,
    triples: Option<usize>,
) -> Result<i32, Error> {
    let mut cfg: SweepConfig = load_json(cli.config.as_deref())?;
    cfg.worlds = worlds.unwrap_or(cfg.worlds);
    cfg.max_inputs = max_inputs.unwrap_or(cfg.max_inputs);
    cfg.max_labels = max_labels.unwrap_or(cfg.max_labels);
    cfg.identity_triples = triples.unwrap_or(cfg.identity_triples);
    let r = sweep(&cfg, cli.seed.unwrap_or(0))?;
    println!("worlds: {}", r.worlds);
    println!("hypotheses: {}", r.hypotheses);
    println!("violations: {}", r.violations);
    println!("min slack: {:e}", r.min_slack);
    println!(
        "reliable and complete worlds: {} (violations: {})",
        r.reliable_complete_worlds, r.unlearnable_violations
    );
    println!("complete worlds: {} (violations: {})", r.complete_worlds, r.two_term_violations);
    println!("identity triples: {} (max error: {:e})", r.identity_triples, r.identity_max_error);
    if let Some(out) = &cli.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("bounds.json"), serde_json::to_string_pretty(&r)? + "\n")?;
    }
    if r.total_violations() > 0 || r.identity_max_error > BOUND_SLACK {
        return Ok(EXIT_INVARIANT);
    }
    Ok(EXIT_OK)
}

fn gen_synth(cli: &Cli) -> Result<i32, Error> {
    let mut spec: SynthSpec = load_json(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth-data"));
    let w = gen_synthetic(&spec)?;
    fs::create_dir_all(&out)?;
    for (name, ds) in [("labeled", &w.labeled), ("unlabeled", &w.unlabeled), ("test", &w.test)] {
        let path = out.join(format!("{name}.kpd"));
        write_dataset(&path, ds)?;
        println!("{}: {} samples", path.display(), ds.len());
    }
    fs::write(out.join("spec.json"), serde_json::to_string_pretty(&spec)? + "\n")?;
    Ok(EXIT_OK)
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Estimate { data } => estimate(cli, data),
        Command::TrainSsl { pipeline, data } => train_ssl(cli, *pipeline, data),
        Command::Bench { threads, fresh, data } => bench(cli, *threads, *fresh, data),
        Command::VerifyBounds {
            worlds,
            max_inputs,
            max_labels,
            triples,
        } => verify_bounds(cli, *worlds, *max_inputs, *max_labels, *triples),
        Command::GenSynth => gen_synth(cli),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
