//! Heuristics Miner frequency counters, dependency measures and Causal Net
//! construction.
//!
//! Counts are kept as `f64` so the same measures serve the batch miner (whole
//! numbers) and the aging queues (decayed, real-valued weights).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, ObservationPeriod};

/// Nested `a -> b -> value` map over activity pairs, ordered by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairMap<V> {
    inner: BTreeMap<String, BTreeMap<String, V>>,
}

impl<V> PairMap<V> {
    pub fn new() -> Self {
        PairMap {
            inner: BTreeMap::new(),
        }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&V> {
        self.inner.get(a).and_then(|m| m.get(b))
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.get(a, b).is_some()
    }

    pub fn insert(&mut self, a: &str, b: &str, value: V) -> Option<V> {
        self.inner
            .entry(a.to_owned())
            .or_default()
            .insert(b.to_owned(), value)
    }

    pub fn entry_mut(&mut self, a: &str, b: &str) -> &mut V
    where
        V: Default,
    {
        if !self.inner.contains_key(a) {
            self.inner.insert(a.to_owned(), BTreeMap::new());
        }
        let row = self.inner.get_mut(a).unwrap();
        if !row.contains_key(b) {
            row.insert(b.to_owned(), V::default());
        }
        row.get_mut(b).unwrap()
    }

    /// Successors of `a` with their values.
    pub fn row(&self, a: &str) -> impl Iterator<Item = (&str, &V)> + '_ {
        self.inner
            .get(a)
            .into_iter()
            .flat_map(|m| m.iter().map(|(b, v)| (b.as_str(), v)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &V)> + '_ {
        self.inner
            .iter()
            .flat_map(|(a, m)| m.iter().map(move |(b, v)| (a.as_str(), b.as_str(), v)))
    }

    pub fn len(&self) -> usize {
        self.inner.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.values().all(BTreeMap::is_empty)
    }
}

impl PairMap<f64> {
    pub fn value(&self, a: &str, b: &str) -> f64 {
        self.get(a, b).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, a: &str, b: &str, amount: f64) {
        *self.entry_mut(a, b) += amount;
    }

    pub fn total(&self) -> f64 {
        self.iter().map(|(_, _, v)| *v).sum()
    }
}

/// Frequencies the Heuristics Miner measures are computed from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuccessionCounts {
    /// `|a|`
    pub activity: BTreeMap<String, f64>,
    /// `|a > b|`: b directly follows a in the same case.
    pub direct: PairMap<f64>,
    /// `|a >² b|`: the pattern a, b, a.
    pub two_step: PairMap<f64>,
    /// `|a >>> b|`: a eventually followed by b with neither repeated in between.
    pub indirect: PairMap<f64>,
    pub num_cases: f64,
}

#[derive(Default)]
struct CaseCursor<'a> {
    prev: Option<&'a str>,
    prev2: Option<&'a str>,
    position: usize,
    last_seen: HashMap<&'a str, usize>,
}

impl SuccessionCounts {
    /// Counts a log given in stream order; events of the same case are paired
    /// in the order they appear.
    pub fn from_events<'a, I>(events: I) -> Self
    where
        I: IntoIterator<Item = &'a Event>,
    {
        let mut counts = SuccessionCounts::default();
        let mut cases: HashMap<&'a str, CaseCursor<'a>> = HashMap::new();
        for event in events {
            let act = event.activity.as_str();
            *counts.activity.entry(act.to_owned()).or_insert(0.0) += 1.0;
            let cursor = cases.entry(event.case_id.as_str()).or_default();
            if let Some(prev) = cursor.prev {
                counts.direct.add(prev, act, 1.0);
                if cursor.prev2 == Some(act) {
                    counts.two_step.add(act, prev, 1.0);
                }
            }
            let own_last = cursor.last_seen.get(act).copied();
            for (&other, &pos) in &cursor.last_seen {
                if other != act && own_last.is_none_or(|own| pos > own) {
                    counts.indirect.add(other, act, 1.0);
                }
            }
            cursor.last_seen.insert(act, cursor.position);
            cursor.position += 1;
            cursor.prev2 = cursor.prev;
            cursor.prev = Some(act);
        }
        counts.num_cases = cases.len() as f64;
        counts
    }

    pub fn activity_count(&self, a: &str) -> f64 {
        self.activity.get(a).copied().unwrap_or(0.0)
    }

    /// `(|a>b| - |b>a|) / (|a>b| + |b>a| + 1)`
    pub fn dependency(&self, a: &str, b: &str) -> f64 {
        let ab = self.direct.value(a, b);
        let ba = self.direct.value(b, a);
        (ab - ba) / (ab + ba + 1.0)
    }

    /// `(|b>c| + |c>b|) / (|a>b| + |a>c| + 1)`, the AND-split measure of a
    /// over outgoing b and c.
    pub fn and_measure(&self, a: &str, b: &str, c: &str) -> f64 {
        let interleaved = self.direct.value(b, c) + self.direct.value(c, b);
        interleaved / (self.direct.value(a, b) + self.direct.value(a, c) + 1.0)
    }

    /// Mirror of [`and_measure`](Self::and_measure) for a join at `d` over
    /// incoming b and c.
    pub fn and_join_measure(&self, b: &str, c: &str, d: &str) -> f64 {
        let interleaved = self.direct.value(b, c) + self.direct.value(c, b);
        interleaved / (self.direct.value(b, d) + self.direct.value(c, d) + 1.0)
    }

    /// `|a >>> b| / (|b| + 1)`
    pub fn long_distance(&self, a: &str, b: &str) -> f64 {
        self.indirect.value(a, b) / (self.activity_count(b) + 1.0)
    }

    /// `|a>a| / (|a>a| + 1)`
    pub fn loop_one(&self, a: &str) -> f64 {
        let aa = self.direct.value(a, a);
        aa / (aa + 1.0)
    }

    /// `(|a>²b| + |b>²a|) / (|a>²b| + |b>²a| + 1)`
    pub fn loop_two(&self, a: &str, b: &str) -> f64 {
        let n = self.two_step.value(a, b) + self.two_step.value(b, a);
        n / (n + 1.0)
    }
}

/// Batch counting over an observation period.
pub fn count_log(log: &ObservationPeriod) -> SuccessionCounts {
    SuccessionCounts::from_events(log)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub dependency: f64,
    pub and_threshold: f64,
    pub long_distance: f64,
    pub loop_one: f64,
    pub loop_two: f64,
    /// 0 disables relative-to-best pruning.
    pub relative_to_best: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            dependency: 0.9,
            and_threshold: 0.1,
            long_distance: 0.9,
            loop_one: 0.9,
            loop_two: 0.9,
            relative_to_best: 0.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.dependency,
            self.and_threshold,
            self.long_distance,
            self.loop_one,
            self.loop_two,
            self.relative_to_best,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("thresholds must be finite".into()));
        }
        if !(-1.0..=1.0).contains(&self.dependency) {
            return Err(Error::InvalidConfig("dependency threshold must lie in [-1, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.and_threshold) {
            return Err(Error::InvalidConfig("AND threshold must lie in [0, 1]".into()));
        }
        if self.relative_to_best < 0.0 {
            return Err(Error::InvalidConfig("relative-to-best must be non-negative".into()));
        }
        Ok(())
    }
}

/// Which optional relation families `generate_model` derives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOptions {
    pub long_distance: bool,
    pub two_loops: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            long_distance: true,
            two_loops: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Xor,
}

/// One alternative of a split or join: a single branch (XOR) or a bundle of
/// branches that fire together (AND).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub activities: Vec<String>,
}

/// Dependency graph with split/join semantics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CausalModel {
    pub activities: BTreeMap<String, f64>,
    pub edges: PairMap<f64>,
    pub splits: BTreeMap<String, Vec<Gate>>,
    pub joins: BTreeMap<String, Vec<Gate>>,
    pub self_loops: BTreeSet<String>,
    /// Unordered pairs, stored with the lexicographically smaller name first.
    pub two_loops: BTreeSet<(String, String)>,
    pub long_edges: PairMap<f64>,
}

impl CausalModel {
    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.contains(a, b)
    }

    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|(a, b, _)| (a.to_owned(), b.to_owned()))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn split_kind(&self, a: &str, b: &str) -> Option<GateKind> {
        self.splits.get(a).and_then(|gates| {
            gates
                .iter()
                .find(|g| g.activities.iter().any(|x| x == b))
                .map(|g| g.kind)
        })
    }

    /// Deterministic Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph {\n");
        for a in self.activities.keys() {
            out.push_str(&format!("  {};\n", dot_id(a)));
        }
        for (a, b, _) in self.edges.iter() {
            match self.split_kind(a, b) {
                Some(GateKind::And) => out.push_str(&format!(
                    "  {} -> {} [label=\"AND\"];\n",
                    dot_id(a),
                    dot_id(b)
                )),
                Some(GateKind::Xor) => out.push_str(&format!(
                    "  {} -> {} [label=\"XOR\"];\n",
                    dot_id(a),
                    dot_id(b)
                )),
                None => out.push_str(&format!("  {} -> {};\n", dot_id(a), dot_id(b))),
            }
        }
        for a in &self.self_loops {
            out.push_str(&format!("  {} -> {};\n", dot_id(a), dot_id(a)));
        }
        for (a, b) in &self.two_loops {
            out.push_str(&format!(
                "  {} -> {} [dir=both, style=dotted];\n",
                dot_id(a),
                dot_id(b)
            ));
        }
        for (a, b, _) in self.long_edges.iter() {
            out.push_str(&format!("  {} -> {} [style=dashed];\n", dot_id(a), dot_id(b)));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDump::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ModelDump = serde_json::from_str(text)?;
        Ok(dump.into())
    }
}

/// DOT renders of a model.
pub fn export_dot(model: &CausalModel) -> String {
    model.to_dot()
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Serialize, Deserialize)]
struct EdgeDump {
    from: String,
    to: String,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    activities: BTreeMap<String, f64>,
    edges: Vec<EdgeDump>,
    joins: BTreeMap<String, Vec<Gate>>,
    long_edges: Vec<EdgeDump>,
    self_loops: BTreeSet<String>,
    splits: BTreeMap<String, Vec<Gate>>,
    two_loops: BTreeSet<(String, String)>,
}

fn dump_pairs(map: &PairMap<f64>) -> Vec<EdgeDump> {
    map.iter()
        .map(|(a, b, v)| EdgeDump {
            from: a.to_owned(),
            to: b.to_owned(),
            value: *v,
        })
        .collect()
}

fn load_pairs(edges: Vec<EdgeDump>) -> PairMap<f64> {
    let mut map = PairMap::new();
    for e in edges {
        map.insert(&e.from, &e.to, e.value);
    }
    map
}

impl From<&CausalModel> for ModelDump {
    fn from(m: &CausalModel) -> Self {
        ModelDump {
            activities: m.activities.clone(),
            edges: dump_pairs(&m.edges),
            joins: m.joins.clone(),
            long_edges: dump_pairs(&m.long_edges),
            self_loops: m.self_loops.clone(),
            splits: m.splits.clone(),
            two_loops: m.two_loops.clone(),
        }
    }
}

impl From<ModelDump> for CausalModel {
    fn from(d: ModelDump) -> Self {
        CausalModel {
            activities: d.activities,
            edges: load_pairs(d.edges),
            splits: d.splits,
            joins: d.joins,
            self_loops: d.self_loops,
            two_loops: d.two_loops,
            long_edges: load_pairs(d.long_edges),
        }
    }
}

/// Builds a Causal Net from counters. Long-distance and length-two loop
/// relations only appear when `counts` carries indirect / two-step
/// frequencies, which the streaming counters never do.
pub fn generate_model(
    counts: &SuccessionCounts,
    thresholds: &Thresholds,
    options: &ModelOptions,
) -> CausalModel {
    let mut model = CausalModel {
        activities: counts.activity.clone(),
        ..CausalModel::default()
    };
    for (a, b, _) in counts.direct.iter() {
        for x in [a, b] {
            if !model.activities.contains_key(x) {
                model.activities.insert(x.to_owned(), 0.0);
            }
        }
    }

    let mut best: HashMap<&str, f64> = HashMap::new();
    if thresholds.relative_to_best > 0.0 {
        for (a, b, _) in counts.direct.iter() {
            if a != b {
                let dep = counts.dependency(a, b);
                let slot = best.entry(a).or_insert(f64::NEG_INFINITY);
                *slot = slot.max(dep);
            }
        }
    }
    for (a, b, _) in counts.direct.iter() {
        if a == b {
            continue;
        }
        let dep = counts.dependency(a, b);
        if dep < thresholds.dependency {
            continue;
        }
        if thresholds.relative_to_best > 0.0 && dep < best[a] - thresholds.relative_to_best {
            continue;
        }
        model.edges.insert(a, b, dep);
    }

    for a in model.activities.keys() {
        if counts.direct.value(a, a) > 0.0 && counts.loop_one(a) >= thresholds.loop_one {
            model.self_loops.insert(a.clone());
        }
    }

    if options.two_loops {
        for (a, b, _) in counts.two_step.iter() {
            if a == b || model.self_loops.contains(a) || model.self_loops.contains(b) {
                continue;
            }
            if counts.loop_two(a, b) >= thresholds.loop_two {
                let pair = if a < b { (a, b) } else { (b, a) };
                model.two_loops.insert((pair.0.to_owned(), pair.1.to_owned()));
            }
        }
    }

    let mut incoming: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut outgoing: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b, _) in model.edges.iter() {
        outgoing.entry(a).or_default().push(b);
        incoming.entry(b).or_default().push(a);
    }
    for (&a, targets) in &outgoing {
        if targets.len() >= 2 {
            let gates = group_branches(targets, |x, y| {
                counts.and_measure(a, x, y) >= thresholds.and_threshold
            });
            model.splits.insert(a.to_owned(), gates);
        }
    }
    for (&d, sources) in &incoming {
        if sources.len() >= 2 {
            let gates = group_branches(sources, |x, y| {
                counts.and_join_measure(x, y, d) >= thresholds.and_threshold
            });
            model.joins.insert(d.to_owned(), gates);
        }
    }

    if options.long_distance {
        let mut long = PairMap::new();
        for (a, b, _) in counts.indirect.iter() {
            if a == b || model.has_edge(a, b) {
                continue;
            }
            let value = counts.long_distance(a, b);
            if value >= thresholds.long_distance && can_escape(&outgoing, a, b) {
                long.insert(a, b, value);
            }
        }
        model.long_edges = long;
    }
    model
}

/// Greedy partition of branches: a branch joins the first bundle whose every
/// member is in AND relation with it, otherwise it opens a new one.
fn group_branches<F>(branches: &[&str], is_and: F) -> Vec<Gate>
where
    F: Fn(&str, &str) -> bool,
{
    let mut groups: Vec<Vec<&str>> = Vec::new();
    for &branch in branches {
        match groups
            .iter_mut()
            .find(|g| g.iter().all(|&member| is_and(member, branch)))
        {
            Some(group) => group.push(branch),
            None => groups.push(vec![branch]),
        }
    }
    groups
        .into_iter()
        .map(|g| Gate {
            kind: if g.len() >= 2 { GateKind::And } else { GateKind::Xor },
            activities: g.into_iter().map(str::to_owned).collect(),
        })
        .collect()
}

/// True when some dependency path from `from` reaches a sink without passing
/// through `avoid`; a long-distance relation is redundant otherwise.
fn can_escape(outgoing: &BTreeMap<&str, Vec<&str>>, from: &str, avoid: &str) -> bool {
    let mut stack = vec![from];
    let mut seen: BTreeSet<&str> = BTreeSet::from([from]);
    while let Some(node) = stack.pop() {
        let next: Vec<&str> = outgoing
            .get(node)
            .map(|v| v.iter().copied().filter(|n| *n != avoid).collect())
            .unwrap_or_default();
        let has_any = outgoing.get(node).is_some_and(|v| !v.is_empty());
        if !has_any {
            return true;
        }
        for n in next {
            if seen.insert(n) {
                stack.push(n);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn and_split_log() -> Vec<Event> {
        let mut events = Vec::new();
        let mut seq = 0;
        for case in 0..10 {
            let trace: &[&str] = if case < 5 {
                &["A", "B1", "B2", "C", "D"]
            } else {
                &["A", "B2", "B1", "C", "D"]
            };
            for act in trace {
                events.push(Event::new(seq, format!("c{case}"), *act));
                seq += 1;
            }
        }
        events
    }

    fn trace_log(trace: &[&str]) -> Vec<Event> {
        trace
            .iter()
            .enumerate()
            .map(|(i, a)| Event::new(i as u64, "c", *a))
            .collect()
    }

    fn counts_with(direct: &[(&str, &str, f64)]) -> SuccessionCounts {
        let mut c = SuccessionCounts::default();
        for (a, b, v) in direct {
            c.direct.add(a, b, *v);
        }
        c
    }

    #[test]
    fn and_split_log_counts() {
        let counts = SuccessionCounts::from_events(&and_split_log());
        assert_eq!(counts.direct.value("A", "B1"), 5.0);
        assert_eq!(counts.direct.value("B1", "B2"), 5.0);
        assert_eq!(counts.direct.value("C", "D"), 10.0);
        assert_eq!(counts.indirect.value("A", "C"), 10.0);
        assert_eq!(counts.activity_count("C"), 10.0);
        assert_eq!(counts.num_cases, 10.0);
        assert!((counts.long_distance("A", "C") - 10.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn empty_log_counts_nothing() {
        let counts = SuccessionCounts::from_events(&[]);
        assert!(counts.activity.is_empty());
        assert!(counts.direct.is_empty());
        assert!(counts.two_step.is_empty());
        assert!(counts.indirect.is_empty());
    }

    #[test]
    fn aba_trace() {
        let counts = SuccessionCounts::from_events(&trace_log(&["A", "B", "A"]));
        assert_eq!(counts.two_step.value("A", "B"), 1.0);
        assert_eq!(counts.direct.value("A", "B"), 1.0);
        assert_eq!(counts.direct.value("B", "A"), 1.0);
    }

    #[test]
    fn measure_examples() {
        let counts = SuccessionCounts::from_events(&and_split_log());
        assert!((counts.dependency("A", "B1") - 5.0 / 6.0).abs() < 1e-12);
        assert!((counts.and_measure("A", "B1", "B2") - 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(SuccessionCounts::default().dependency("x", "y"), 0.0);
        let c = counts_with(&[("a", "b", 3.0), ("b", "a", 1.0)]);
        assert!((c.dependency("a", "b") - 0.4).abs() < 1e-12);

        assert_eq!(counts_with(&[("a", "b", 2.0)]).and_measure("a", "b", "c"), 0.0);
        let c = counts_with(&[("b", "c", 1.0), ("a", "b", 2.0), ("a", "c", 2.0)]);
        assert!((c.and_measure("a", "b", "c") - 0.2).abs() < 1e-12);

        let mut c = SuccessionCounts::default();
        c.indirect.add("a", "b", 9.0);
        c.activity.insert("b".into(), 9.0);
        assert!((c.long_distance("a", "b") - 0.9).abs() < 1e-12);
        assert_eq!(c.long_distance("b", "a"), 0.0);

        let c = counts_with(&[("a", "a", 4.0)]);
        assert!((c.loop_one("a") - 0.8).abs() < 1e-12);
        let mut c = SuccessionCounts::default();
        assert_eq!((c.loop_one("a"), c.loop_two("a", "b")), (0.0, 0.0));
        c.two_step.add("a", "b", 2.0);
        c.two_step.add("b", "a", 1.0);
        assert!((c.loop_two("a", "b") - 0.75).abs() < 1e-12);
    }

    #[test]
    fn and_split_log_model() {
        let counts = SuccessionCounts::from_events(&and_split_log());
        let thresholds = Thresholds {
            dependency: 0.8,
            and_threshold: 0.1,
            ..Thresholds::default()
        };
        let model = generate_model(&counts, &thresholds, &ModelOptions::default());
        let expected: BTreeSet<(String, String)> = [("A", "B1"), ("A", "B2"), ("B1", "C"), ("B2", "C"), ("C", "D")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(model.edge_set(), expected);
        assert_eq!(
            model.splits["A"],
            vec![Gate {
                kind: GateKind::And,
                activities: vec!["B1".into(), "B2".into()]
            }]
        );
        assert_eq!(model.joins["C"][0].kind, GateKind::And);
        assert_eq!(model.splits.len(), 1);
        assert!(model.long_edges.is_empty());
        assert!(model.self_loops.is_empty());

        let dot = model.to_dot();
        assert_eq!(dot.matches(" -> ").count(), 5);
        assert_eq!(dot.lines().filter(|l| !l.contains("->") && l.ends_with("\";")).count(), 5);
        assert!(dot.contains("\"A\" -> \"B1\" [label=\"AND\"];"));

        let back = CausalModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn xor_split_when_branches_never_interleave() {
        let mut events = Vec::new();
        for i in 0..24 {
            let mid = if i % 2 == 0 { "B" } else { "C" };
            let case = format!("c{i}");
            for act in ["A", mid, "D"] {
                events.push(Event::new(events.len() as u64, case.clone(), act));
            }
        }
        let counts = SuccessionCounts::from_events(&events);
        let model = generate_model(&counts, &Thresholds::default(), &ModelOptions::default());
        assert_eq!(model.split_kind("A", "B"), Some(GateKind::Xor));
        assert_eq!(model.split_kind("A", "C"), Some(GateKind::Xor));
        assert_eq!(model.splits["A"].len(), 2);
    }

    #[test]
    fn empty_and_single_relation_models() {
        let model = generate_model(&SuccessionCounts::default(), &Thresholds::default(), &ModelOptions::default());
        assert_eq!(model, CausalModel::default());
        assert_eq!(model.to_dot(), "digraph {\n}\n");

        let mut c = counts_with(&[("a", "b", 10.0)]);
        c.activity.insert("a".into(), 10.0);
        let model = generate_model(&c, &Thresholds { dependency: 0.8, ..Thresholds::default() }, &ModelOptions::default());
        assert_eq!(model.edge_count(), 1);
        assert!(model.splits.is_empty());
        // unknown endpoint added with zero frequency
        assert_eq!(model.activities["b"], 0.0);
    }

    #[test]
    fn self_loop_rendered() {
        let counts = SuccessionCounts::from_events(&trace_log(&["A", "A", "A", "A", "A", "A", "A", "A", "A", "A", "A", "B"]));
        let model = generate_model(&counts, &Thresholds::default(), &ModelOptions::default());
        assert!(model.self_loops.contains("A"));
        assert!(model.to_dot().contains("\"A\" -> \"A\";"));
    }

    #[test]
    fn two_loops_from_batch_counts() {
        let mut events = Vec::new();
        for case in 0..10 {
            for act in ["S", "A", "B", "A", "B", "A", "E"] {
                events.push(Event::new(events.len() as u64, format!("c{case}"), act));
            }
        }
        let counts = SuccessionCounts::from_events(&events);
        let model = generate_model(&counts, &Thresholds::default(), &ModelOptions::default());
        assert!(model.two_loops.contains(&("A".to_string(), "B".to_string())));
        let off = ModelOptions { two_loops: false, long_distance: false };
        assert!(generate_model(&counts, &Thresholds::default(), &off).two_loops.is_empty());
    }

    #[test]
    fn relative_to_best_prunes_weaker_edges() {
        let mut c = counts_with(&[("a", "b", 100.0), ("a", "c", 10.0)]);
        c.activity.insert("a".into(), 110.0);
        let plain = generate_model(&c, &Thresholds::default(), &ModelOptions::default());
        assert_eq!(plain.edge_count(), 2);
        let pruned = generate_model(
            &c,
            &Thresholds { relative_to_best: 0.05, ..Thresholds::default() },
            &ModelOptions::default(),
        );
        assert_eq!(pruned.edge_count(), 1);
        assert!(pruned.has_edge("a", "b"));
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::default().validate().is_ok());
        assert!(Thresholds { dependency: f64::NAN, ..Thresholds::default() }.validate().is_err());
        assert!(Thresholds { and_threshold: 2.0, ..Thresholds::default() }.validate().is_err());
    }

    /// Naive per-trace pattern scan used as the counting oracle.
    fn brute_force(events: &[Event]) -> SuccessionCounts {
        let mut traces: Vec<(String, Vec<&str>)> = Vec::new();
        for e in events {
            match traces.iter_mut().find(|(c, _)| *c == e.case_id) {
                Some((_, t)) => t.push(&e.activity),
                None => traces.push((e.case_id.clone(), vec![&e.activity])),
            }
        }
        let mut c = SuccessionCounts {
            num_cases: traces.len() as f64,
            ..SuccessionCounts::default()
        };
        for (_, t) in &traces {
            for a in t {
                *c.activity.entry(a.to_string()).or_insert(0.0) += 1.0;
            }
            for i in 0..t.len() {
                if i + 1 < t.len() {
                    c.direct.add(t[i], t[i + 1], 1.0);
                }
                if i + 2 < t.len() && t[i] == t[i + 2] {
                    c.two_step.add(t[i], t[i + 1], 1.0);
                }
                for j in i + 1..t.len() {
                    if t[i] == t[j] {
                        continue;
                    }
                    let clean = (i + 1..j).all(|k| t[k] != t[i] && t[k] != t[j]);
                    if clean {
                        c.indirect.add(t[i], t[j], 1.0);
                    }
                }
            }
        }
        c
    }

    fn random_log() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec((0u8..6, 0u8..8), 0..200).prop_map(|raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, (case, act))| Event::new(i as u64, format!("c{case}"), format!("a{act}")))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn counting_matches_brute_force(log in random_log()) {
            let fast = SuccessionCounts::from_events(&log);
            prop_assert_eq!(&fast, &brute_force(&log));
            let pairs: usize = {
                let mut last: HashMap<&str, ()> = HashMap::new();
                log.iter().filter(|e| last.insert(&e.case_id, ()).is_some()).count()
            };
            prop_assert_eq!(fast.direct.total(), pairs as f64);
        }

        #[test]
        fn measure_ranges_and_antisymmetry(ab in 0.0f64..50.0, ba in 0.0f64..50.0, ac in 0.0f64..50.0, bc in 0.0f64..50.0) {
            let c = counts_with(&[("a", "b", ab), ("b", "a", ba), ("a", "c", ac), ("b", "c", bc), ("a", "a", ab)]);
            let d = c.dependency("a", "b");
            prop_assert!((d + c.dependency("b", "a")).abs() < 1e-12);
            prop_assert!(d > -1.0 && d < 1.0);
            let and = c.and_measure("a", "b", "c");
            prop_assert!(and >= 0.0);
            prop_assert!((0.0..1.0).contains(&c.loop_one("a")));
            let mut more = c.clone();
            more.direct.add("a", "b", 1.0);
            prop_assert!(more.dependency("a", "b") >= d);
        }

        #[test]
        fn batch_model_is_deterministic(log in random_log()) {
            let t = Thresholds { dependency: 0.5, ..Thresholds::default() };
            let m1 = generate_model(&count_log(&ObservationPeriod::from_events(log.clone())), &t, &ModelOptions::default());
            let m2 = generate_model(&count_log(&ObservationPeriod::from_events(log)), &t, &ModelOptions::default());
            prop_assert_eq!(m1.to_dot(), m2.to_dot());
            for (a, b, _) in m1.edges.iter() {
                prop_assert!(m1.activities.contains_key(a) && m1.activities.contains_key(b));
            }
            for (a, gates) in &m1.splits {
                prop_assert!(m1.edges.row(a).count() >= 2);
                prop_assert!(!gates.is_empty());
            }
        }
    }
}
