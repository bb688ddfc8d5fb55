//! Experiment driver: feeds one stream through one miner, evaluates every
//! generated model on the latest events and writes the run artifacts.
//!
//! A run directory holds `metrics.csv`, `model_<seq>.dot` snapshots, the final
//! `model.json` and `summary.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{record_sample, EvalWindow, MetricSeries, DEFAULT_EVAL_WINDOW};
use crate::event::{Event, MemoryPolicy};
use crate::lossy::{LossyConfig, LossyMiner};
use crate::metrics::Thresholds;
use crate::miner::{MinerKind, StreamMiner, DEFAULT_MINE_EVERY};
use crate::net::{read_stream, Codec, EventReader, OnDecodeError};
use crate::online::{AlphaSteps, OnlineConfig, OnlineMiner, WeightPolicy};
use crate::window::{WindowMiner, WindowMinerConfig};

pub const DEFAULT_QUEUE_SIZE: usize = 100;
pub const DEFAULT_AGING_ALPHA: f64 = 0.997;
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Window miners get the same budget as three queues of the default size.
pub const DEFAULT_WINDOW_SIZE: usize = 3 * DEFAULT_QUEUE_SIZE;
const PIPELINE_DEPTH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    File(PathBuf),
    Network(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub miner: MinerKind,
    pub input: InputSource,
    pub codec: Codec,
    pub on_decode_error: OnDecodeError,
    pub output_dir: PathBuf,
    /// Capacity of each online queue; `None` leaves them unbounded.
    pub queue_size: Option<usize>,
    /// Buffer capacity of the reset and sliding-window miners.
    pub window_size: usize,
    /// Fixed aging factor, or the starting one for self-adapting runs.
    pub alpha: f64,
    pub steps: AlphaSteps,
    pub epsilon: f64,
    pub mine_every: u64,
    pub eval_window: usize,
    pub thresholds: Thresholds,
    /// Write a DOT snapshot every this many mining runs; 0 disables them.
    pub snapshot_every: u64,
    /// Record wall-clock timings. Off makes every artifact reproducible.
    pub timing: bool,
}

impl RunConfig {
    pub fn new(miner: MinerKind, input: InputSource, output_dir: impl Into<PathBuf>) -> Self {
        let alpha = match miner {
            MinerKind::SelfAdapting => 1.0,
            _ => DEFAULT_AGING_ALPHA,
        };
        RunConfig {
            miner,
            input,
            codec: Codec::Line,
            on_decode_error: OnDecodeError::Abort,
            output_dir: output_dir.into(),
            queue_size: Some(DEFAULT_QUEUE_SIZE),
            window_size: DEFAULT_WINDOW_SIZE,
            alpha,
            steps: AlphaSteps::default(),
            epsilon: DEFAULT_EPSILON,
            mine_every: DEFAULT_MINE_EVERY,
            eval_window: DEFAULT_EVAL_WINDOW,
            thresholds: Thresholds::default(),
            snapshot_every: 10,
            timing: true,
        }
    }

    fn online_config(&self, policy: WeightPolicy) -> OnlineConfig {
        let mut cfg = match self.queue_size {
            Some(size) => OnlineConfig::bounded(size, policy),
            None => OnlineConfig::unbounded(policy),
        };
        cfg.mine_every = self.mine_every;
        cfg.thresholds = self.thresholds;
        cfg
    }

    /// Most entries the miner plus the evaluation window may hold, when known.
    pub fn entry_budget(&self) -> Option<usize> {
        let miner = match self.miner {
            MinerKind::Reset | MinerKind::Window => Some(self.window_size),
            MinerKind::Online | MinerKind::Aging | MinerKind::SelfAdapting => {
                self.online_config(WeightPolicy::Stationary).entry_budget()
            }
            MinerKind::Lossy => None,
        };
        Some(miner? + self.eval_window)
    }
}

pub fn build_miner(config: &RunConfig) -> Result<Box<dyn StreamMiner>> {
    let window = |policy| -> Result<Box<dyn StreamMiner>> {
        let mut cfg = WindowMinerConfig::new(config.window_size, policy);
        cfg.mine_every = config.mine_every;
        cfg.thresholds = config.thresholds;
        Ok(Box::new(WindowMiner::new(cfg)?))
    };
    let online = |policy| -> Result<Box<dyn StreamMiner>> {
        Ok(Box::new(OnlineMiner::new(config.online_config(policy))?))
    };
    match config.miner {
        MinerKind::Reset => window(MemoryPolicy::Reset),
        MinerKind::Window => window(MemoryPolicy::Shift),
        MinerKind::Online => online(WeightPolicy::Stationary),
        MinerKind::Aging => online(WeightPolicy::Aging { alpha: config.alpha }),
        MinerKind::SelfAdapting => online(WeightPolicy::self_adapting(config.alpha, config.steps)),
        MinerKind::Lossy => {
            let mut cfg = LossyConfig::new(config.epsilon);
            cfg.mine_every = config.mine_every;
            cfg.thresholds = config.thresholds;
            Ok(Box::new(LossyMiner::new(cfg)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub miner: MinerKind,
    pub events: u64,
    pub skipped_events: usize,
    pub mining_runs: u64,
    pub peak_retained_entries: usize,
    pub entry_budget: Option<usize>,
    pub final_alpha: f64,
    pub elapsed_secs: f64,
    pub events_per_sec: f64,
}

type EventSource = Box<dyn Iterator<Item = Result<Event>>>;

fn open_input(config: &RunConfig) -> Result<(EventSource, mpsc::Receiver<usize>)> {
    let (warn_tx, warn_rx) = mpsc::channel();
    match &config.input {
        InputSource::File(path) => {
            let file = fs::File::open(path)?;
            let reader = EventReader::new(BufReader::new(file), config.codec, config.on_decode_error);
            Ok((Box::new(CountingReader { inner: reader, warn_tx }), warn_rx))
        }
        InputSource::Network(address) => {
            // reader thread and miner loop joined by a bounded queue; a full
            // queue stalls the reader instead of dropping events
            let reader = read_stream(address.as_str(), config.codec, config.on_decode_error)?;
            let (tx, rx) = mpsc::sync_channel(PIPELINE_DEPTH);
            thread::spawn(move || {
                let mut reader = CountingReader { inner: reader, warn_tx };
                for item in reader.by_ref() {
                    if tx.send(item).is_err() {
                        break;
                    }
                }
            });
            Ok((Box::new(rx.into_iter()), warn_rx))
        }
    }
}

/// Reports the reader's final warning count once it is exhausted.
struct CountingReader<R> {
    inner: EventReader<R>,
    warn_tx: mpsc::Sender<usize>,
}

impl<R: std::io::BufRead> Iterator for CountingReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        let item = self.inner.next();
        if item.is_none() {
            let _ = self.warn_tx.send(self.inner.warnings().len());
        }
        item
    }
}

/// Consumes the whole input once and writes the run artifacts.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    if config.eval_window == 0 {
        return Err(Error::InvalidConfig("evaluation window must hold at least one event".into()));
    }
    let mut miner = build_miner(config)?;
    let mut window = EvalWindow::new(config.eval_window)?;
    let (events, warnings) = open_input(config)?;
    fs::create_dir_all(&config.output_dir)?;

    let budget = config.entry_budget();
    let mut series = MetricSeries::new();
    let mut processed = 0u64;
    let mut mining_runs = 0u64;
    let mut peak = 0usize;
    let started = Instant::now();
    let mut interval_start = Instant::now();
    let mut interval_events = 0u64;

    for event in events {
        let event = event?;
        window.push(event.clone());
        let model = miner.observe(&event);
        processed += 1;
        interval_events += 1;

        let held = miner.retained_entries() + window.len();
        peak = peak.max(held);
        if let Some(limit) = budget {
            if held > limit {
                return Err(Error::GuaranteeViolated {
                    key: format!("event {}", event.seq_no),
                    reason: format!("{held} retained entries exceed the budget of {limit}"),
                });
            }
        }

        if let Some(model) = model {
            mining_runs += 1;
            let micros = if config.timing {
                interval_start.elapsed().as_secs_f64() * 1e6 / interval_events as f64
            } else {
                0.0
            };
            let sample = record_sample(&mut series, event.seq_no, &model, miner.as_ref(), &window, micros);
            miner.on_fitness(sample.fitness);
            if config.snapshot_every > 0 && mining_runs.is_multiple_of(config.snapshot_every) {
                let path = config.output_dir.join(format!("model_{}.dot", event.seq_no));
                fs::write(path, model.to_dot())?;
            }
            interval_start = Instant::now();
            interval_events = 0;
        }
    }

    let elapsed = if config.timing { started.elapsed().as_secs_f64() } else { 0.0 };
    let summary = RunSummary {
        miner: config.miner,
        events: processed,
        skipped_events: warnings.try_iter().sum(),
        mining_runs,
        peak_retained_entries: peak,
        entry_budget: budget,
        final_alpha: miner.alpha(),
        elapsed_secs: elapsed,
        events_per_sec: if elapsed > 0.0 { processed as f64 / elapsed } else { 0.0 },
    };
    series.save(&config.output_dir.join("metrics.csv"))?;
    fs::write(config.output_dir.join("model.json"), miner.model().to_json()?)?;
    let mut out = fs::File::create(config.output_dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(summary)
}

pub fn load_summary(run_dir: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(run_dir.join("summary.json"))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub miner: MinerKind,
    pub seq_no: u64,
    pub runs: usize,
    pub fitness_mean: f64,
    pub fitness_var: f64,
    pub precision_mean: f64,
    pub precision_var: f64,
}

/// Mean and population variance.
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Aligns the metric series of several run directories by `seq_no` and
/// reports mean and variance per miner kind.
pub fn compare(run_dirs: &[PathBuf]) -> Result<Vec<CompareRow>> {
    if run_dirs.is_empty() {
        return Err(Error::InvalidConfig("compare needs at least one run directory".into()));
    }
    // (miner, seq_no) -> (kind, fitness values, precision values)
    type Group = (MinerKind, Vec<f64>, Vec<f64>);
    let mut grouped: BTreeMap<(String, u64), Group> = BTreeMap::new();
    for dir in run_dirs {
        let kind = load_summary(dir)?.miner;
        for s in MetricSeries::load(&dir.join("metrics.csv"))?.samples {
            let slot = grouped
                .entry((kind.as_str().to_owned(), s.seq_no))
                .or_insert_with(|| (kind, Vec::new(), Vec::new()));
            slot.1.push(s.fitness);
            slot.2.push(s.precision);
        }
    }
    Ok(grouped
        .into_iter()
        .map(|((_, seq_no), (miner, fit, prec))| {
            let (fitness_mean, fitness_var) = moments(&fit);
            let (precision_mean, precision_var) = moments(&prec);
            CompareRow {
                miner,
                seq_no,
                runs: fit.len(),
                fitness_mean,
                fitness_var,
                precision_mean,
                precision_var,
            }
        })
        .collect())
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if rows.is_empty() {
        writer.write_record([
            "miner",
            "seq_no",
            "runs",
            "fitness_mean",
            "fitness_var",
            "precision_mean",
            "precision_var",
        ])?;
    }
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
