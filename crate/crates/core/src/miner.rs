use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::event::Event;
use crate::metrics::CausalModel;

/// Default number of accepted events between two model generations.
pub const DEFAULT_MINE_EVERY: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinerKind {
    /// Batch HM over a buffer that is emptied when full.
    Reset,
    /// Batch HM over a sliding window of the latest events.
    Window,
    /// Online HM with plain counting weights.
    Online,
    /// Online HM with a fixed aging factor.
    Aging,
    /// Online HM whose aging factor follows the observed fitness.
    SelfAdapting,
    /// Lossy Counting HM.
    Lossy,
}

impl MinerKind {
    pub const ALL: [MinerKind; 6] = [
        MinerKind::Reset,
        MinerKind::Window,
        MinerKind::Online,
        MinerKind::Aging,
        MinerKind::SelfAdapting,
        MinerKind::Lossy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MinerKind::Reset => "reset",
            MinerKind::Window => "window",
            MinerKind::Online => "online",
            MinerKind::Aging => "aging",
            MinerKind::SelfAdapting => "self_adapting",
            MinerKind::Lossy => "lossy",
        }
    }
}

impl fmt::Display for MinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MinerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown miner kind {s:?}")))
    }
}

/// Common face of every stream miner.
pub trait StreamMiner {
    fn kind(&self) -> MinerKind;

    /// Consumes one event; returns a freshly generated model when the mining
    /// trigger fires.
    fn observe(&mut self, event: &Event) -> Option<CausalModel>;

    /// Generates a model from the current state regardless of the trigger.
    fn model(&self) -> CausalModel;

    /// Events, queue entries or table entries currently held.
    fn retained_entries(&self) -> usize;

    fn alpha(&self) -> f64 {
        1.0
    }

    /// Feedback hook called by the driver after each mining trigger.
    fn on_fitness(&mut self, _fitness: f64) {}
}

/// Count-based mining trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningTrigger {
    every: u64,
    seen: u64,
}

impl MiningTrigger {
    pub fn new(every: u64) -> Result<Self, Error> {
        if every == 0 {
            return Err(Error::InvalidConfig("mining trigger must be at least 1".into()));
        }
        Ok(MiningTrigger { every, seen: 0 })
    }

    pub fn every(&self) -> u64 {
        self.every
    }

    /// Registers one accepted event; true when mining is due.
    pub fn tick(&mut self) -> bool {
        self.seen += 1;
        self.seen.is_multiple_of(self.every)
    }
}
