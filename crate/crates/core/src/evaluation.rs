//! Model quality over the latest events of the stream.
//!
//! Fitness here is the share of adjacent same-case pairs in the window that
//! the model can explain by an edge (or a self loop); precision is the share
//! of model edges the window actually exercises. Both are cheap replay
//! proxies and are not comparable in absolute value with alignment-based
//! fitness or escaping-edges precision.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event::{Event, MemoryPolicy, ObservationPeriod};
use crate::metrics::CausalModel;
use crate::miner::StreamMiner;

pub const DEFAULT_EVAL_WINDOW: usize = 200;

/// The last `x` events of the stream.
#[derive(Debug, Clone)]
pub struct EvalWindow {
    events: ObservationPeriod,
}

impl EvalWindow {
    pub fn new(x: usize) -> Result<Self> {
        Ok(EvalWindow {
            events: ObservationPeriod::new(x)?,
        })
    }

    pub fn push(&mut self, event: Event) {
        self.events.push_bounded(event, MemoryPolicy::Shift);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.events.capacity()
    }

    /// Directly-follows pairs of the same case, both events inside the window.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        let mut last: HashMap<&str, &str> = HashMap::new();
        let mut pairs = Vec::new();
        for e in self.events.iter() {
            if let Some(prev) = last.insert(&e.case_id, &e.activity) {
                pairs.push((prev, e.activity.as_str()));
            }
        }
        pairs
    }
}

fn explains(model: &CausalModel, a: &str, b: &str) -> bool {
    model.has_edge(a, b) || (a == b && model.self_loops.contains(a))
}

/// Share of window pairs replayable on the model; 1.0 without pairs.
pub fn window_fitness(window: &EvalWindow, model: &CausalModel) -> f64 {
    let pairs = window.pairs();
    if pairs.is_empty() {
        return 1.0;
    }
    let fit = pairs.iter().filter(|(a, b)| explains(model, a, b)).count();
    fit as f64 / pairs.len() as f64
}

/// Share of model edges exercised by the window; 1.0 for an edge-free model.
pub fn window_precision(window: &EvalWindow, model: &CausalModel) -> f64 {
    let total = model.edge_count();
    if total == 0 {
        return 1.0;
    }
    let seen: BTreeSet<(&str, &str)> = window.pairs().into_iter().collect();
    let used = model
        .edges
        .iter()
        .filter(|(a, b, _)| seen.contains(&(*a, *b)))
        .count();
    used as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub seq_no: u64,
    pub fitness: f64,
    pub precision: f64,
    pub alpha: f64,
    pub entries: u64,
    pub micros_per_event: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSeries {
    pub samples: Vec<Sample>,
}

impl MetricSeries {
    pub fn new() -> Self {
        MetricSeries::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        if self.samples.is_empty() {
            writer.write_record(["seq_no", "fitness", "precision", "alpha", "entries", "micros_per_event"])?;
        }
        for s in &self.samples {
            writer.serialize(s)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let samples = reader.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(MetricSeries { samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Evaluates `model` on the window and appends the sample. Miners without an
/// aging factor report 1.0.
pub fn record_sample(
    series: &mut MetricSeries,
    seq_no: u64,
    model: &CausalModel,
    miner: &dyn StreamMiner,
    window: &EvalWindow,
    micros_per_event: f64,
) -> Sample {
    let sample = Sample {
        seq_no,
        fitness: window_fitness(window, model),
        precision: window_precision(window, model),
        alpha: miner.alpha(),
        entries: miner.retained_entries() as u64,
        micros_per_event,
    };
    series.samples.push(sample);
    sample
}
