//! Lossy Counting HM: approximate frequencies of activities, cases and direct
//! successions, pruned at every bucket boundary.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::metrics::{generate_model, CausalModel, ModelOptions, SuccessionCounts, Thresholds};
use crate::miner::{MinerKind, MiningTrigger, StreamMiner, DEFAULT_MINE_EVERY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossyEntry<P> {
    /// Estimated frequency since insertion.
    pub frequency: u64,
    /// Maximum undercount, the bucket id before insertion.
    pub delta: u64,
    pub payload: P,
}

/// A set of `(key, f, Δ)` entries with an optional hard size cap.
#[derive(Debug, Clone)]
pub struct LossyTable<K, P = ()> {
    entries: HashMap<K, LossyEntry<P>>,
    max_entries: Option<usize>,
    peak: usize,
}

impl<K: Hash + Eq + Ord + Clone, P> LossyTable<K, P> {
    pub fn new(max_entries: Option<usize>) -> Self {
        LossyTable {
            entries: HashMap::new(),
            max_entries,
            peak: 0,
        }
    }

    pub fn get(&self, key: &K) -> Option<&LossyEntry<P>> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest size observed so far.
    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &LossyEntry<P>)> + '_ {
        self.entries.iter()
    }

    /// Increments `key` or inserts it with frequency 1 and `Δ = bucket - 1`.
    /// Returns the previous payload when the key was present.
    fn observe(&mut self, key: K, payload: P, bucket: u64) -> Option<P> {
        if let Some(entry) = self.entries.get_mut(&key) {
            entry.frequency += 1;
            return Some(std::mem::replace(&mut entry.payload, payload));
        }
        self.entries.insert(
            key.clone(),
            LossyEntry {
                frequency: 1,
                delta: bucket - 1,
                payload,
            },
        );
        if let Some(cap) = self.max_entries {
            while self.entries.len() > cap {
                self.evict_weakest(&key);
            }
        }
        self.peak = self.peak.max(self.entries.len());
        None
    }

    fn evict_weakest(&mut self, keep: &K) {
        let victim = self
            .entries
            .iter()
            .filter(|(k, _)| *k != keep)
            .min_by(|(ka, a), (kb, b)| {
                (a.frequency + a.delta)
                    .cmp(&(b.frequency + b.delta))
                    .then_with(|| ka.cmp(kb))
            })
            .map(|(k, _)| k.clone());
        if let Some(k) = victim {
            self.entries.remove(&k);
        }
    }

    /// Removes every entry with `f + Δ <= bucket`.
    fn cleanup(&mut self, bucket: u64) {
        self.entries.retain(|_, e| e.frequency + e.delta > bucket);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossyConfig {
    pub epsilon: f64,
    pub mine_every: u64,
    pub thresholds: Thresholds,
    /// Per-table hard cap; not part of the classic algorithm.
    pub max_entries: Option<usize>,
}

impl LossyConfig {
    pub fn new(epsilon: f64) -> Self {
        LossyConfig {
            epsilon,
            mine_every: DEFAULT_MINE_EVERY,
            thresholds: Thresholds::default(),
            max_entries: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.max_entries == Some(0) {
            return Err(Error::InvalidConfig("max entries must be at least 1".into()));
        }
        self.thresholds.validate()
    }

    /// `⌈1/ε⌉`, snapping to the nearest integer when 1/ε is within rounding
    /// noise of it.
    pub fn bucket_width(&self) -> u64 {
        let inv = 1.0 / self.epsilon;
        let rounded = inv.round();
        if (inv - rounded).abs() < 1e-9 * rounded.max(1.0) {
            rounded as u64
        } else {
            inv.ceil() as u64
        }
    }
}

pub type Relation = (String, String);

#[derive(Debug, Clone)]
pub struct LossyMiner {
    config: LossyConfig,
    width: u64,
    /// Next event number, starting at 1.
    n: u64,
    activities: LossyTable<String>,
    cases: LossyTable<String, String>,
    relations: LossyTable<Relation>,
    trigger: MiningTrigger,
    last_relation: Option<Relation>,
}

/// Exact counts kept next to a lossy miner for checking its guarantee.
#[derive(Debug, Clone, Default)]
pub struct OracleCounts {
    pub activities: HashMap<String, u64>,
    pub cases: HashMap<String, u64>,
    pub relations: HashMap<Relation, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: String,
    pub estimated: u64,
    pub exact: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuaranteeReport {
    pub checked: usize,
    pub allowed_error: f64,
    pub violations: Vec<Violation>,
}

impl GuaranteeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::GuaranteeViolated {
                key: v.key.clone(),
                reason: format!(
                    "estimated {} vs exact {} (allowed undercount {})",
                    v.estimated, v.exact, self.allowed_error
                ),
            }),
        }
    }
}

fn check_table<K: Debug + Hash + Eq + Ord + Clone, P>(
    table: &LossyTable<K, P>,
    exact: &HashMap<K, u64>,
    allowed: f64,
    report: &mut GuaranteeReport,
) {
    for (key, entry) in table.iter() {
        report.checked += 1;
        let truth = exact.get(key).copied().unwrap_or(0);
        let f = entry.frequency;
        if f > truth || (truth - f) as f64 > allowed {
            report.violations.push(Violation {
                key: format!("{key:?}"),
                estimated: f,
                exact: truth,
            });
        }
    }
}

impl LossyMiner {
    pub fn new(config: LossyConfig) -> Result<Self> {
        config.validate()?;
        Ok(LossyMiner {
            width: config.bucket_width(),
            n: 1,
            activities: LossyTable::new(config.max_entries),
            cases: LossyTable::new(config.max_entries),
            relations: LossyTable::new(config.max_entries),
            trigger: MiningTrigger::new(config.mine_every)?,
            last_relation: None,
            config,
        })
    }

    pub fn bucket_width(&self) -> u64 {
        self.width
    }

    /// Events processed so far.
    pub fn processed(&self) -> u64 {
        self.n - 1
    }

    pub fn current_bucket(&self) -> u64 {
        self.n.div_ceil(self.width)
    }

    pub fn activities(&self) -> &LossyTable<String> {
        &self.activities
    }

    pub fn cases(&self) -> &LossyTable<String, String> {
        &self.cases
    }

    pub fn relations(&self) -> &LossyTable<Relation> {
        &self.relations
    }

    /// The succession recorded by the latest event, if any.
    pub fn last_relation(&self) -> Option<&Relation> {
        self.last_relation.as_ref()
    }

    /// True right after an event that triggered a cleanup.
    pub fn at_bucket_boundary(&self) -> bool {
        self.processed() > 0 && self.processed().is_multiple_of(self.width)
    }

    /// Applies one event to the three tables without checking the trigger.
    pub fn update(&mut self, event: &Event) {
        let bucket = self.current_bucket();
        let activity = &event.activity;
        self.activities.observe(activity.clone(), (), bucket);
        self.last_relation = None;
        if let Some(previous) = self
            .cases
            .observe(event.case_id.clone(), activity.clone(), bucket)
        {
            let relation = (previous, activity.clone());
            self.relations.observe(relation.clone(), (), bucket);
            self.last_relation = Some(relation);
        }
        if self.n.is_multiple_of(self.width) {
            self.activities.cleanup(bucket);
            self.cases.cleanup(bucket);
            self.relations.cleanup(bucket);
        }
        self.n += 1;
    }

    pub fn snapshot_counters(&self) -> SuccessionCounts {
        let mut counts = SuccessionCounts {
            num_cases: self.cases.len() as f64,
            ..SuccessionCounts::default()
        };
        for (a, e) in self.activities.iter() {
            counts.activity.insert(a.clone(), e.frequency as f64);
        }
        for ((a, b), e) in self.relations.iter() {
            counts.direct.insert(a, b, e.frequency as f64);
        }
        counts
    }

    /// Checks `exact - ε·N <= f <= exact` for every retained key.
    pub fn frequency_guarantee_check(&self, oracle: &OracleCounts) -> GuaranteeReport {
        let allowed = self.config.epsilon * self.processed() as f64;
        let mut report = GuaranteeReport {
            allowed_error: allowed,
            ..GuaranteeReport::default()
        };
        check_table(&self.activities, &oracle.activities, allowed, &mut report);
        check_table(&self.cases, &oracle.cases, allowed, &mut report);
        check_table(&self.relations, &oracle.relations, allowed, &mut report);
        report.violations.sort_by(|a, b| a.key.cmp(&b.key));
        report
    }
}

impl StreamMiner for LossyMiner {
    fn kind(&self) -> MinerKind {
        MinerKind::Lossy
    }

    fn observe(&mut self, event: &Event) -> Option<CausalModel> {
        self.update(event);
        self.trigger.tick().then(|| self.model())
    }

    fn model(&self) -> CausalModel {
        generate_model(
            &self.snapshot_counters(),
            &self.config.thresholds,
            &ModelOptions {
                long_distance: false,
                two_loops: false,
            },
        )
    }

    fn retained_entries(&self) -> usize {
        self.activities.len() + self.cases.len() + self.relations.len()
    }
}
