//! `gen`, `run` and `sweep`.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use driftwidth_core::{generate, run_prequential, summarize, write_csv, RunLog, RunSummary};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Per-run summary as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    #[serde(flatten)]
    pub summary: RunSummary,
    pub seed: u64,
    pub config_hash: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// The single seed a `gen`/`run` invocation uses.
pub fn single_seed(config: &ExperimentConfig, seed: Option<u64>) -> Result<u64, CliError> {
    match (seed, config.seeds.as_slice()) {
        (Some(s), _) => Ok(s),
        (None, [s]) => Ok(*s),
        (None, seeds) => Err(CliError::Config(format!(
            "invalid seeds: expected exactly one seed (or --seed), found {}",
            seeds.len()
        ))),
    }
}

/// Writes the generated stream as CSV to `out`.
pub fn gen(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let samples = generate(&config.schedule, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    write_csv(&samples, file).map_err(|e| io_err(out, e))
}

/// Runs one prequential experiment in memory.
pub fn execute(config: &ExperimentConfig, seed: u64) -> Result<(RunLog, RunSummary), CliError> {
    let runtime = |e: driftwidth_core::Error| CliError::Runtime(format!("seed {seed}: {e}"));
    let stream = generate(&config.schedule, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let mut model = config
        .model
        .build(config.schedule.dim())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut detector = config
        .detector
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut log = match detector.as_mut() {
        Some(det) => run_prequential(&stream, model.as_mut(), Some(det.as_mut())),
        None => run_prequential(&stream, model.as_mut(), None),
    }
    .map_err(runtime)?;
    log.seed = seed;
    log.config_echo = config.canonical_json();
    let summary = summarize(&log, config.drift_t(), &config.windows).map_err(runtime)?;
    Ok((log, summary))
}

fn write_run(dir: &Path, log: &RunLog, record: &SummaryRecord) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("runlog.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    log.write_csv(file).map_err(|e| io_err(&path, e))?;
    write_json(&dir.join("summary.json"), record)
}

/// One-line human summary.
pub fn summary_line(record: &SummaryRecord) -> String {
    let s = &record.summary;
    let delay = s
        .detection_delay
        .map_or_else(|| "none".to_owned(), |d| d.to_string());
    format!(
        "seed {}: pearson {:.4}, detection delay {}, false alarms {}",
        record.seed, s.pearson_drift_window, delay, s.false_alarms
    )
}

/// Runs a single experiment and writes `runlog.csv` and `summary.json`.
pub fn run(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<SummaryRecord, CliError> {
    let (log, summary) = execute(config, seed)?;
    let record = SummaryRecord {
        summary,
        seed,
        config_hash: config.hash(),
    };
    write_run(out_dir, &log, &record)?;
    Ok(record)
}

/// Median, minimum and maximum of one summary field across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Some(Self {
            median,
            min: v[0],
            max: v[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub config_hash: String,
    pub n_seeds: usize,
    pub completed: usize,
    pub failed_seeds: Vec<u64>,
    pub pearson_drift_window: Option<Spread>,
    pub mae_pre: Option<Spread>,
    pub mae_post: Option<Spread>,
    pub width_pre: Option<Spread>,
    pub width_post: Option<Spread>,
    pub coverage: Option<Spread>,
    /// Over the seeds that detected the drift.
    pub detection_delay: Option<Spread>,
    pub false_alarms: Option<Spread>,
    pub crossing_count: Option<Spread>,
    /// Fraction of completed seeds with an event at or after the drift.
    pub detection_success_rate: Option<f64>,
}

impl Aggregate {
    pub fn new(
        config_hash: String,
        n_seeds: usize,
        records: &[SummaryRecord],
        failed_seeds: Vec<u64>,
    ) -> Self {
        let field = |f: fn(&RunSummary) -> f64| {
            Spread::of(&records.iter().map(|r| f(&r.summary)).collect::<Vec<_>>())
        };
        let delays: Vec<f64> = records
            .iter()
            .filter_map(|r| r.summary.detection_delay.map(|d| d as f64))
            .collect();
        Self {
            config_hash,
            n_seeds,
            completed: records.len(),
            failed_seeds,
            pearson_drift_window: field(|s| s.pearson_drift_window),
            mae_pre: field(|s| s.mae_pre),
            mae_post: field(|s| s.mae_post),
            width_pre: field(|s| s.width_pre),
            width_post: field(|s| s.width_post),
            coverage: field(|s| s.coverage),
            detection_delay: Spread::of(&delays),
            false_alarms: field(|s| s.false_alarms as f64),
            crossing_count: field(|s| s.crossing_count as f64),
            detection_success_rate: (!records.is_empty())
                .then(|| delays.len() as f64 / records.len() as f64),
        }
    }
}

/// Test hooks for [`sweep`].
#[derive(Default)]
pub struct SweepOptions {
    pub quiet: bool,
    /// Seed positions whose run is forced to fail.
    pub fail_at: Vec<usize>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub aggregate: Aggregate,
    pub records: Vec<SummaryRecord>,
}

/// Directory holding the outputs of the `index`-th seed.
pub fn seed_dir(out_dir: &Path, index: usize, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{index:03}_{seed}"))
}

/// Runs every seed in parallel. `aggregate.json` is always written; a
/// failing seed turns the result into a runtime error afterwards.
pub fn sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
    opts: &SweepOptions,
) -> Result<SweepReport, CliError> {
    if config.seeds.len() < 2 {
        return Err(CliError::Config(format!(
            "invalid seeds: sweep needs at least 2, found {}",
            config.seeds.len()
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let hash = config.hash();
    let results: Vec<Result<SummaryRecord, CliError>> = config
        .seeds
        .par_iter()
        .enumerate()
        .map(|(index, &seed)| {
            if opts.fail_at.contains(&index) {
                return Err(CliError::Runtime(format!("seed {seed}: injected failure")));
            }
            let (log, summary) = execute(config, seed)?;
            let record = SummaryRecord {
                summary,
                seed,
                config_hash: hash.clone(),
            };
            write_run(&seed_dir(out_dir, index, seed), &log, &record)?;
            if !opts.quiet {
                println!("{}", summary_line(&record));
            }
            Ok(record)
        })
        .collect();

    let mut records = Vec::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (result, &seed) in results.into_iter().zip(&config.seeds) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => {
                eprintln!("error: {e}");
                failed.push(seed);
                first_error.get_or_insert(e);
            }
        }
    }
    let aggregate = Aggregate::new(hash, config.seeds.len(), &records, failed);
    write_json(&out_dir.join("aggregate.json"), &aggregate)?;
    match first_error {
        // I/O trouble keeps its own exit code; everything else is a runtime failure.
        Some(CliError::Io(msg)) => Err(CliError::Io(msg)),
        Some(e) => Err(CliError::Runtime(e.to_string())),
        None => Ok(SweepReport { aggregate, records }),
    }
}

pub fn print_line(line: &str) {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let _ = writeln!(lock, "{line}");
}
