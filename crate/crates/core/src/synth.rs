//! Synthetic event logs from block-structured process specifications.
//!
//! A spec is a tree of sequences, weighted exclusive choices, parallel blocks
//! (branches interleaved uniformly at random) and loops. A [`StreamPlan`]
//! chains specs into segments; cases of one segment all finish before the
//! next segment starts, so drifts never produce cases spanning two models.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessSpec {
    Activity(String),
    Sequence(Vec<ProcessSpec>),
    Choice(Vec<Branch>),
    Parallel(Vec<ProcessSpec>),
    Loop {
        body: Box<ProcessSpec>,
        /// Probability of running the body once more after each pass.
        repeat: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub weight: f64,
    pub block: ProcessSpec,
}

pub fn act(name: &str) -> ProcessSpec {
    ProcessSpec::Activity(name.to_owned())
}

pub fn seq(blocks: Vec<ProcessSpec>) -> ProcessSpec {
    ProcessSpec::Sequence(blocks)
}

pub fn and(blocks: Vec<ProcessSpec>) -> ProcessSpec {
    ProcessSpec::Parallel(blocks)
}

pub fn xor(branches: Vec<(f64, ProcessSpec)>) -> ProcessSpec {
    ProcessSpec::Choice(
        branches
            .into_iter()
            .map(|(weight, block)| Branch { weight, block })
            .collect(),
    )
}

pub fn repeat(body: ProcessSpec, probability: f64) -> ProcessSpec {
    ProcessSpec::Loop {
        body: Box::new(body),
        repeat: probability,
    }
}

impl ProcessSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProcessSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Activity(name) if name.is_empty() => {
                Err(Error::InvalidConfig("activity names must be non-empty".into()))
            }
            ProcessSpec::Activity(_) => Ok(()),
            ProcessSpec::Sequence(blocks) | ProcessSpec::Parallel(blocks) => {
                if blocks.is_empty() {
                    return Err(Error::InvalidConfig("empty sequence or parallel block".into()));
                }
                blocks.iter().try_for_each(ProcessSpec::validate)
            }
            ProcessSpec::Choice(branches) => {
                if branches.is_empty() {
                    return Err(Error::InvalidConfig("choice without branches".into()));
                }
                for b in branches {
                    if !(b.weight > 0.0 && b.weight.is_finite()) {
                        return Err(Error::InvalidConfig(format!(
                            "choice weights must be positive, got {}",
                            b.weight
                        )));
                    }
                    b.block.validate()?;
                }
                Ok(())
            }
            ProcessSpec::Loop { body, repeat } => {
                if !(0.0..1.0).contains(repeat) {
                    return Err(Error::InvalidConfig(format!(
                        "loop repeat probability must lie in [0, 1), got {repeat}"
                    )));
                }
                body.validate()
            }
        }
    }

    /// Draws one trace.
    pub fn sample_trace<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<String> {
        let mut out = Vec::new();
        self.sample_into(rng, &mut out);
        out
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<String>) {
        match self {
            ProcessSpec::Activity(name) => out.push(name.clone()),
            ProcessSpec::Sequence(blocks) => {
                for b in blocks {
                    b.sample_into(rng, out);
                }
            }
            ProcessSpec::Choice(branches) => {
                let total: f64 = branches.iter().map(|b| b.weight).sum();
                let mut pick = rng.gen::<f64>() * total;
                let chosen = branches
                    .iter()
                    .find(|b| {
                        pick -= b.weight;
                        pick < 0.0
                    })
                    .unwrap_or_else(|| branches.last().unwrap());
                chosen.block.sample_into(rng, out);
            }
            ProcessSpec::Parallel(blocks) => {
                let mut parts: Vec<VecDeque<String>> = blocks
                    .iter()
                    .map(|b| b.sample_trace(rng).into())
                    .collect();
                let mut remaining: usize = parts.iter().map(VecDeque::len).sum();
                // picking a branch proportionally to its leftover length
                // makes every interleaving equally likely
                while remaining > 0 {
                    let mut pick = rng.gen_range(0..remaining);
                    let part = parts
                        .iter_mut()
                        .find(|p| {
                            if pick < p.len() {
                                true
                            } else {
                                pick -= p.len();
                                false
                            }
                        })
                        .unwrap();
                    out.push(part.pop_front().unwrap());
                    remaining -= 1;
                }
            }
            ProcessSpec::Loop { body, repeat } => loop {
                body.sample_into(rng, out);
                if rng.gen::<f64>() >= *repeat {
                    break;
                }
            },
        }
    }

    /// Exact distribution over traces for loop-free specs; `None` otherwise.
    pub fn trace_distribution(&self) -> Option<BTreeMap<Vec<String>, f64>> {
        let mut dist = BTreeMap::new();
        for (trace, p) in self.enumerate()? {
            *dist.entry(trace).or_insert(0.0) += p;
        }
        Some(dist)
    }

    fn enumerate(&self) -> Option<Vec<(Vec<String>, f64)>> {
        match self {
            ProcessSpec::Activity(name) => Some(vec![(vec![name.clone()], 1.0)]),
            ProcessSpec::Sequence(blocks) => {
                let mut acc = vec![(Vec::new(), 1.0)];
                for b in blocks {
                    let options = b.enumerate()?;
                    acc = acc
                        .iter()
                        .flat_map(|(prefix, p)| {
                            options.iter().map(move |(t, q)| {
                                let mut joined = prefix.clone();
                                joined.extend(t.iter().cloned());
                                (joined, p * q)
                            })
                        })
                        .collect();
                }
                Some(acc)
            }
            ProcessSpec::Choice(branches) => {
                let total: f64 = branches.iter().map(|b| b.weight).sum();
                let mut acc = Vec::new();
                for b in branches {
                    for (t, q) in b.block.enumerate()? {
                        acc.push((t, q * b.weight / total));
                    }
                }
                Some(acc)
            }
            ProcessSpec::Parallel(blocks) => {
                let mut acc: Vec<(Vec<Vec<String>>, f64)> = vec![(Vec::new(), 1.0)];
                for b in blocks {
                    let options = b.enumerate()?;
                    acc = acc
                        .iter()
                        .flat_map(|(parts, p)| {
                            options.iter().map(move |(t, q)| {
                                let mut parts = parts.clone();
                                parts.push(t.clone());
                                (parts, p * q)
                            })
                        })
                        .collect();
                }
                let mut out = Vec::new();
                for (parts, p) in acc {
                    let shuffles = interleavings(&parts);
                    let each = p / shuffles.len() as f64;
                    out.extend(shuffles.into_iter().map(|t| (t, each)));
                }
                Some(out)
            }
            ProcessSpec::Loop { .. } => None,
        }
    }
}

fn interleavings(parts: &[Vec<String>]) -> Vec<Vec<String>> {
    fn go(parts: &[Vec<String>], cursor: &mut Vec<usize>, current: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        let mut done = true;
        for i in 0..parts.len() {
            if cursor[i] < parts[i].len() {
                done = false;
                current.push(parts[i][cursor[i]].clone());
                cursor[i] += 1;
                go(parts, cursor, current, out);
                cursor[i] -= 1;
                current.pop();
            }
        }
        if done {
            out.push(current.clone());
        }
    }
    let mut out = Vec::new();
    go(parts, &mut vec![0; parts.len()], &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub spec: ProcessSpec,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamPlan {
    pub segments: Vec<Segment>,
    /// Most cases running at the same time.
    pub max_concurrent: usize,
    pub seed: u64,
}

impl StreamPlan {
    pub fn single(spec: ProcessSpec, cases: usize, max_concurrent: usize, seed: u64) -> Self {
        StreamPlan {
            segments: vec![Segment { spec, cases }],
            max_concurrent,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: StreamPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig("plan needs at least one segment".into()));
        }
        if self.max_concurrent == 0 {
            return Err(Error::InvalidConfig("max concurrent cases must be at least 1".into()));
        }
        for s in &self.segments {
            if s.cases == 0 {
                return Err(Error::InvalidConfig("segments need at least one case".into()));
            }
            s.spec.validate()?;
        }
        Ok(())
    }
}

/// Generates the stream described by `plan`. Deterministic for a fixed seed.
pub fn generate(plan: &StreamPlan) -> Result<Vec<Event>> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut events = Vec::new();
    let mut next_case = 0usize;
    for segment in &plan.segments {
        let mut pending: VecDeque<(String, VecDeque<String>)> = (0..segment.cases)
            .map(|_| {
                let id = format!("case_{next_case}");
                next_case += 1;
                (id, segment.spec.sample_trace(&mut rng).into())
            })
            .collect();
        let mut active: Vec<(String, VecDeque<String>)> = Vec::new();
        loop {
            while active.len() < plan.max_concurrent {
                match pending.pop_front() {
                    Some(case) => active.push(case),
                    None => break,
                }
            }
            if active.is_empty() {
                break;
            }
            let slot = rng.gen_range(0..active.len());
            let (case_id, trace) = &mut active[slot];
            let activity = trace.pop_front().expect("active cases are non-empty");
            events.push(Event::new(events.len() as u64, case_id.clone(), activity));
            if trace.is_empty() {
                active.swap_remove(slot);
            }
        }
    }
    Ok(events)
}
