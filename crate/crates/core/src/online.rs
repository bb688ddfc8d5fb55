//! Fully online Heuristics Miner over three bounded most-recently-used
//! queues: activities, the last activity of each case, and direct
//! successions. The weight policy decides how queue weights evolve.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::metrics::{generate_model, CausalModel, ModelOptions, SuccessionCounts, Thresholds};
use crate::miner::{MinerKind, MiningTrigger, StreamMiner, DEFAULT_MINE_EVERY};

/// Bounded queue ordered by recency of use, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct MruQueue<K, V> {
    entries: VecDeque<(K, V)>,
    capacity: Option<usize>,
}

pub type ActivityQueue = MruQueue<String, f64>;
pub type CaseQueue = MruQueue<String, String>;
pub type RelationQueue = MruQueue<(String, String), f64>;

impl<K, V> MruQueue<K, V> {
    /// `None` means unbounded.
    pub fn new(capacity: Option<usize>) -> Self {
        MruQueue {
            entries: VecDeque::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.entries.len() >= c)
    }

    /// Removes and returns the first entry whose key matches.
    pub fn take_by(&mut self, matches: impl Fn(&K) -> bool) -> Option<(K, V)> {
        let pos = self.entries.iter().position(|(k, _)| matches(k))?;
        self.entries.remove(pos)
    }

    pub fn push_front(&mut self, key: K, value: V) {
        self.entries.push_front((key, value));
    }

    /// Drops the least recently used entry.
    pub fn remove_last(&mut self) -> Option<(K, V)> {
        self.entries.pop_back()
    }

    pub fn front(&self) -> Option<&(K, V)> {
        self.entries.front()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &(K, V)> + '_ {
        self.entries.iter()
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut V> + '_ {
        self.entries.iter_mut().map(|(_, v)| v)
    }
}

/// Counting update: only the front entry gains one.
pub fn update_weights_stationary<K>(queue: &mut MruQueue<K, f64>) {
    if let Some((_, w)) = queue.entries.front_mut() {
        *w += 1.0;
    }
}

/// Aging update: every weight is scaled by `alpha`, the front one then gains one.
pub fn update_weights_aging<K>(queue: &mut MruQueue<K, f64>, alpha: f64) {
    for w in queue.values_mut() {
        *w *= alpha;
    }
    update_weights_stationary(queue);
}

/// Constant-step rule: lower alpha when fitness drops by more than
/// `tolerance`, raise it otherwise. Clamped to [0, 1].
pub fn adapt_alpha(alpha: f64, fitness_now: f64, fitness_prev: f64, steps: &AlphaSteps) -> f64 {
    if fitness_now - fitness_prev < -steps.tolerance {
        (alpha - steps.step_down).max(0.0)
    } else {
        (alpha + steps.step_up).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSteps {
    pub step_down: f64,
    pub step_up: f64,
    pub tolerance: f64,
}

impl Default for AlphaSteps {
    fn default() -> Self {
        AlphaSteps {
            step_down: 0.02,
            step_up: 0.005,
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightPolicy {
    Stationary,
    Aging { alpha: f64 },
    SelfAdapting {
        alpha: f64,
        steps: AlphaSteps,
        last_fitness: Option<f64>,
    },
}

impl WeightPolicy {
    pub fn self_adapting(alpha: f64, steps: AlphaSteps) -> Self {
        WeightPolicy::SelfAdapting {
            alpha,
            steps,
            last_fitness: None,
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            WeightPolicy::Stationary => 1.0,
            WeightPolicy::Aging { alpha } | WeightPolicy::SelfAdapting { alpha, .. } => alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightPolicy::Stationary => Ok(()),
            WeightPolicy::Aging { alpha } if (0.0..1.0).contains(&alpha) => Ok(()),
            WeightPolicy::Aging { alpha } => Err(Error::InvalidConfig(format!(
                "aging factor must lie in [0, 1), got {alpha}"
            ))),
            WeightPolicy::SelfAdapting { alpha, steps, .. } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::InvalidConfig(format!(
                        "initial aging factor must lie in [0, 1], got {alpha}"
                    )));
                }
                if !(steps.step_down > 0.0 && steps.step_up > 0.0 && steps.tolerance >= 0.0) {
                    return Err(Error::InvalidConfig(
                        "alpha steps must be positive and tolerance non-negative".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn update<K>(&self, queue: &mut MruQueue<K, f64>) {
        match self {
            WeightPolicy::Stationary => update_weights_stationary(queue),
            _ => update_weights_aging(queue, self.alpha()),
        }
    }

    fn on_fitness(&mut self, fitness: f64) {
        if let WeightPolicy::SelfAdapting {
            alpha,
            steps,
            last_fitness,
        } = self
        {
            if let Some(prev) = *last_fitness {
                *alpha = adapt_alpha(*alpha, fitness, prev, steps);
            }
            *last_fitness = Some(fitness);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    pub max_activities: Option<usize>,
    pub max_cases: Option<usize>,
    pub max_relations: Option<usize>,
    pub policy: WeightPolicy,
    pub mine_every: u64,
    pub thresholds: Thresholds,
}

impl OnlineConfig {
    /// All three queues bounded by `size`.
    pub fn bounded(size: usize, policy: WeightPolicy) -> Self {
        OnlineConfig {
            max_activities: Some(size),
            max_cases: Some(size),
            max_relations: Some(size),
            policy,
            mine_every: DEFAULT_MINE_EVERY,
            thresholds: Thresholds::default(),
        }
    }

    pub fn unbounded(policy: WeightPolicy) -> Self {
        OnlineConfig {
            max_activities: None,
            max_cases: None,
            max_relations: None,
            ..OnlineConfig::bounded(0, policy)
        }
    }

    /// Upper bound on retained entries, if every queue is bounded.
    pub fn entry_budget(&self) -> Option<usize> {
        Some(self.max_activities? + self.max_cases? + self.max_relations?)
    }
}

#[derive(Debug, Clone)]
pub struct OnlineMiner {
    config: OnlineConfig,
    activities: ActivityQueue,
    cases: CaseQueue,
    relations: RelationQueue,
    policy: WeightPolicy,
    trigger: MiningTrigger,
    evicted_cases: u64,
}

impl OnlineMiner {
    pub fn new(config: OnlineConfig) -> Result<Self> {
        config.policy.validate()?;
        config.thresholds.validate()?;
        for cap in [config.max_activities, config.max_cases, config.max_relations] {
            if cap == Some(0) {
                return Err(Error::InvalidConfig("queue sizes must be at least 1".into()));
            }
        }
        Ok(OnlineMiner {
            activities: MruQueue::new(config.max_activities),
            cases: MruQueue::new(config.max_cases),
            relations: MruQueue::new(config.max_relations),
            policy: config.policy,
            trigger: MiningTrigger::new(config.mine_every)?,
            evicted_cases: 0,
            config,
        })
    }

    pub fn activities(&self) -> &ActivityQueue {
        &self.activities
    }

    pub fn cases(&self) -> &CaseQueue {
        &self.cases
    }

    pub fn relations(&self) -> &RelationQueue {
        &self.relations
    }

    pub fn policy(&self) -> &WeightPolicy {
        &self.policy
    }

    /// `|Q_C| + cases evicted so far`: the number of cases observed, as long
    /// as no case was evicted while still running.
    pub fn cases_seen(&self) -> u64 {
        self.cases.len() as u64 + self.evicted_cases
    }

    /// Queue weights as Heuristics Miner counters.
    pub fn snapshot_counters(&self) -> SuccessionCounts {
        let mut counts = SuccessionCounts {
            num_cases: self.cases_seen() as f64,
            ..SuccessionCounts::default()
        };
        for (a, w) in self.activities.iter() {
            counts.activity.insert(a.clone(), *w);
        }
        for ((a, b), u) in self.relations.iter() {
            counts.direct.insert(a, b, *u);
        }
        counts
    }

    /// Applies one event to the queues without checking the mining trigger.
    pub fn update(&mut self, event: &Event) {
        let activity = event.activity.as_str();
        let (key, w) = match self.activities.take_by(|a| a == activity) {
            Some(entry) => entry,
            None => {
                if self.activities.is_full() {
                    self.activities.remove_last();
                }
                (activity.to_owned(), 0.0)
            }
        };
        self.activities.push_front(key, w);
        self.policy.update(&mut self.activities);

        let case = event.case_id.as_str();
        let case_key = match self.cases.take_by(|c| c == case) {
            Some((case_key, previous)) => {
                let (rel, u) = match self
                    .relations
                    .take_by(|(a, b)| *a == previous && b == activity)
                {
                    Some(entry) => entry,
                    None => {
                        if self.relations.is_full() {
                            self.relations.remove_last();
                        }
                        ((previous, activity.to_owned()), 0.0)
                    }
                };
                self.relations.push_front(rel, u);
                self.policy.update(&mut self.relations);
                case_key
            }
            None => {
                if self.cases.is_full() {
                    self.cases.remove_last();
                    self.evicted_cases += 1;
                }
                case.to_owned()
            }
        };
        self.cases.push_front(case_key, activity.to_owned());
    }
}

impl StreamMiner for OnlineMiner {
    fn kind(&self) -> MinerKind {
        match self.config.policy {
            WeightPolicy::Stationary => MinerKind::Online,
            WeightPolicy::Aging { .. } => MinerKind::Aging,
            WeightPolicy::SelfAdapting { .. } => MinerKind::SelfAdapting,
        }
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

    fn alpha(&self) -> f64 {
        self.policy.alpha()
    }

    fn on_fitness(&mut self, fitness: f64) {
        self.policy.on_fitness(fitness);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::SuccessionCounts;
    use proptest::prelude::*;

    fn queue(entries: &[(&str, f64)]) -> MruQueue<String, f64> {
        let mut q = MruQueue::new(None);
        for (k, v) in entries.iter().rev() {
            q.push_front(k.to_string(), *v);
        }
        q
    }

    fn weights(q: &MruQueue<String, f64>) -> Vec<(String, f64)> {
        q.iter().cloned().collect()
    }

    #[test]
    fn stationary_trace() {
        let mut m = OnlineMiner::new(OnlineConfig::unbounded(WeightPolicy::Stationary)).unwrap();
        m.update(&Event::new(0, "c1", "A"));
        m.update(&Event::new(1, "c1", "B"));
        assert_eq!(weights(m.activities()), [("B".into(), 1.0), ("A".into(), 1.0)]);
        let rels: Vec<_> = m.relations().iter().cloned().collect();
        assert_eq!(rels, [(("A".to_string(), "B".to_string()), 1.0)]);
        let cases: Vec<_> = m.cases().iter().cloned().collect();
        assert_eq!(cases, [("c1".to_string(), "B".to_string())]);
    }

    #[test]
    fn activity_eviction() {
        let mut cfg = OnlineConfig::unbounded(WeightPolicy::Stationary);
        cfg.max_activities = Some(2);
        let mut m = OnlineMiner::new(cfg).unwrap();
        for (i, a) in ["A", "B", "C"].iter().enumerate() {
            m.update(&Event::new(i as u64, format!("c{i}"), *a));
        }
        let names: Vec<&str> = m.activities().iter().map(|(a, _)| a.as_str()).collect();
        assert_eq!(names, ["C", "B"]);
        assert!(m.relations().is_empty());
    }

    #[test]
    fn case_eviction_counts_towards_cases_seen() {
        let mut cfg = OnlineConfig::unbounded(WeightPolicy::Stationary);
        cfg.max_cases = Some(2);
        let mut m = OnlineMiner::new(cfg).unwrap();
        for i in 0..5 {
            m.update(&Event::new(i, format!("c{i}"), "A"));
        }
        assert_eq!(m.cases().len(), 2);
        assert_eq!(m.cases_seen(), 5);
        // evicted case lost its history: no relation recorded
        m.update(&Event::new(5, "c0", "B"));
        assert!(m.relations().is_empty());
    }

    #[test]
    fn stationary_weight_rule() {
        let mut q = queue(&[("A", 3.0), ("B", 5.0)]);
        update_weights_stationary(&mut q);
        assert_eq!(weights(&q), [("A".into(), 4.0), ("B".into(), 5.0)]);
        let mut empty: MruQueue<String, f64> = MruQueue::new(None);
        update_weights_stationary(&mut empty);
        assert!(empty.is_empty());
        let mut single = queue(&[("A", 0.0)]);
        update_weights_stationary(&mut single);
        assert_eq!(weights(&single), [("A".into(), 1.0)]);
    }

    #[test]
    fn aging_weight_rule() {
        let mut q = queue(&[("A", 2.0), ("B", 4.0)]);
        update_weights_aging(&mut q, 0.5);
        assert_eq!(weights(&q), [("A".into(), 2.0), ("B".into(), 2.0)]);
        let mut q = queue(&[("A", 7.0), ("B", 4.0), ("C", 1.5)]);
        update_weights_aging(&mut q, 0.0);
        assert_eq!(weights(&q), [("A".into(), 1.0), ("B".into(), 0.0), ("C".into(), 0.0)]);
    }

    #[test]
    fn alpha_adaptation() {
        let steps = AlphaSteps::default();
        assert!((adapt_alpha(1.0, 0.7, 0.9, &steps) - 0.98).abs() < 1e-12);
        assert_eq!(adapt_alpha(1.0, 0.9, 0.9, &steps), 1.0);
        assert!((adapt_alpha(0.99, 0.8, 0.5, &steps) - 0.995).abs() < 1e-12);
        assert_eq!(adapt_alpha(0.01, 0.0, 1.0, &steps), 0.0);
        // inside tolerance counts as unchanged
        assert!((adapt_alpha(0.9, 0.895, 0.9, &steps) - 0.905).abs() < 1e-12);
    }

    #[test]
    fn self_adapting_converges_on_constant_fitness() {
        let alpha0 = 0.9;
        let steps = AlphaSteps::default();
        let mut p = WeightPolicy::self_adapting(alpha0, steps);
        let ticks = ((1.0 - alpha0) / steps.step_up).ceil() as usize + 1;
        for _ in 0..=ticks {
            p.on_fitness(0.8);
            assert!((0.0..=1.0).contains(&p.alpha()));
        }
        assert_eq!(p.alpha(), 1.0);
    }

    #[test]
    fn policy_validation() {
        assert!(WeightPolicy::Aging { alpha: 1.0 }.validate().is_err());
        assert!(WeightPolicy::Aging { alpha: 0.997 }.validate().is_ok());
        assert!(WeightPolicy::self_adapting(1.0, AlphaSteps::default()).validate().is_ok());
        let bad = AlphaSteps { step_up: 0.0, ..AlphaSteps::default() };
        assert!(WeightPolicy::self_adapting(1.0, bad).validate().is_err());
        assert!(OnlineMiner::new(OnlineConfig::bounded(0, WeightPolicy::Stationary)).is_err());
    }

    #[test]
    fn snapshot_of_fresh_miner_is_empty() {
        let m = OnlineMiner::new(OnlineConfig::bounded(10, WeightPolicy::Stationary)).unwrap();
        let c = m.snapshot_counters();
        assert!(c.activity.is_empty() && c.direct.is_empty());
    }

    #[test]
    fn aging_weights_stay_below_counts() {
        let events: Vec<Event> = (0..40)
            .map(|i| Event::new(i, format!("c{}", i % 4), ["A", "B", "C"][(i as usize / 4) % 3]))
            .collect();
        let mut stationary = OnlineMiner::new(OnlineConfig::unbounded(WeightPolicy::Stationary)).unwrap();
        let mut aging = OnlineMiner::new(OnlineConfig::unbounded(WeightPolicy::Aging { alpha: 0.9 })).unwrap();
        for e in &events {
            stationary.update(e);
            aging.update(e);
        }
        let s = stationary.snapshot_counters();
        let a = aging.snapshot_counters();
        for (act, w) in &a.activity {
            assert!(*w < s.activity[act], "{act}: {w} vs {}", s.activity[act]);
        }
    }

    fn random_stream() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec((0u8..5, 0u8..6), 0..150).prop_map(|raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, (c, a))| Event::new(i as u64, format!("c{c}"), format!("a{a}")))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn stationary_matches_exact_counts_after_every_event(stream in random_stream()) {
            let mut m = OnlineMiner::new(OnlineConfig::unbounded(WeightPolicy::Stationary)).unwrap();
            for i in 0..stream.len() {
                m.update(&stream[i]);
                let exact = SuccessionCounts::from_events(&stream[..=i]);
                let got = m.snapshot_counters();
                prop_assert_eq!(&got.activity, &exact.activity);
                prop_assert_eq!(&got.direct, &exact.direct);
            }
        }

        #[test]
        fn queues_respect_capacity_and_recency(stream in random_stream(), cap in 1usize..5) {
            let mut m = OnlineMiner::new(OnlineConfig::bounded(cap, WeightPolicy::Aging { alpha: 0.8 })).unwrap();
            for e in &stream {
                let before: Vec<(String, f64)> = m.activities().iter().cloned().collect();
                m.update(e);
                prop_assert!(m.activities().len() <= cap);
                prop_assert!(m.cases().len() <= cap);
                prop_assert!(m.relations().len() <= cap);
                prop_assert_eq!(&m.activities().front().unwrap().0, &e.activity);
                prop_assert_eq!(&m.cases().front().unwrap().0, &e.case_id);
                // decay law for entries that were not refreshed
                for (a, w) in m.activities().iter().skip(1) {
                    let old = before.iter().find(|(b, _)| b == a).unwrap().1;
                    prop_assert!((w - 0.8 * old).abs() <= 1e-12);
                    prop_assert!(*w >= 0.0);
                }
            }
        }
    }
}
