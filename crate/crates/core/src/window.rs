//! Baseline miners: keep raw events in a bounded buffer and rerun batch HM on
//! the buffer whenever mining is due.

use crate::error::Result;
use crate::event::{Event, MemoryPolicy, ObservationPeriod};
use crate::metrics::{count_log, generate_model, CausalModel, ModelOptions, Thresholds};
use crate::miner::{MinerKind, MiningTrigger, StreamMiner, DEFAULT_MINE_EVERY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMinerConfig {
    pub capacity: usize,
    pub policy: MemoryPolicy,
    pub mine_every: u64,
    pub thresholds: Thresholds,
}

impl WindowMinerConfig {
    pub fn new(capacity: usize, policy: MemoryPolicy) -> Self {
        WindowMinerConfig {
            capacity,
            policy,
            mine_every: DEFAULT_MINE_EVERY,
            thresholds: Thresholds::default(),
        }
    }
}

type EventFilter = Box<dyn Fn(&Event) -> bool + Send>;

pub struct WindowMiner {
    config: WindowMinerConfig,
    buffer: ObservationPeriod,
    trigger: MiningTrigger,
    filter: Option<EventFilter>,
}

impl WindowMiner {
    pub fn new(config: WindowMinerConfig) -> Result<Self> {
        config.thresholds.validate()?;
        Ok(WindowMiner {
            buffer: ObservationPeriod::new(config.capacity)?,
            trigger: MiningTrigger::new(config.mine_every)?,
            config,
            filter: None,
        })
    }

    /// Only events accepted by `filter` reach the buffer. Accepts all by default.
    pub fn with_filter(mut self, filter: impl Fn(&Event) -> bool + Send + 'static) -> Self {
        self.filter = Some(Box::new(filter));
        self
    }

    pub fn buffer(&self) -> &ObservationPeriod {
        &self.buffer
    }

    pub fn config(&self) -> &WindowMinerConfig {
        &self.config
    }
}

impl StreamMiner for WindowMiner {
    fn kind(&self) -> MinerKind {
        match self.config.policy {
            MemoryPolicy::Reset => MinerKind::Reset,
            MemoryPolicy::Shift => MinerKind::Window,
        }
    }

    fn observe(&mut self, event: &Event) -> Option<CausalModel> {
        if let Some(filter) = &self.filter {
            if !filter(event) {
                return None;
            }
        }
        self.buffer.push_bounded(event.clone(), self.config.policy);
        self.trigger.tick().then(|| self.model())
    }

    fn model(&self) -> CausalModel {
        generate_model(
            &count_log(&self.buffer),
            &self.config.thresholds,
            &ModelOptions::default(),
        )
    }

    fn retained_entries(&self) -> usize {
        self.buffer.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(seq: u64, act: &str) -> Event {
        Event::new(seq, "c", act)
    }

    #[test]
    fn shift_window_mines_latest_events() {
        let mut cfg = WindowMinerConfig::new(3, MemoryPolicy::Shift);
        cfg.mine_every = 1;
        let mut miner = WindowMiner::new(cfg).unwrap();
        let mut last = None;
        for (i, a) in ["A", "B", "C", "D"].iter().enumerate() {
            last = miner.observe(&ev(i as u64, a));
            assert!(last.is_some());
        }
        let acts: Vec<&str> = miner.buffer().iter().map(|e| e.activity.as_str()).collect();
        assert_eq!(acts, ["B", "C", "D"]);
        let expected = generate_model(
            &count_log(&ObservationPeriod::from_events(vec![ev(1, "B"), ev(2, "C"), ev(3, "D")])),
            &Thresholds::default(),
            &ModelOptions::default(),
        );
        assert_eq!(last.unwrap(), expected);
    }

    #[test]
    fn reset_window_restarts() {
        let mut miner = WindowMiner::new(WindowMinerConfig::new(2, MemoryPolicy::Reset)).unwrap();
        for i in 0..3 {
            miner.observe(&ev(i, "A"));
        }
        assert_eq!(miner.buffer().iter().map(|e| e.seq_no).collect::<Vec<_>>(), [2]);
        assert_eq!(miner.kind(), MinerKind::Reset);
    }

    #[test]
    fn trigger_every_fifty() {
        let mut miner = WindowMiner::new(WindowMinerConfig::new(100, MemoryPolicy::Shift)).unwrap();
        for i in 0..49 {
            assert!(miner.observe(&ev(i, "A")).is_none());
        }
        assert!(miner.observe(&ev(49, "A")).is_some());
    }

    #[test]
    fn filter_skips_events() {
        let mut cfg = WindowMinerConfig::new(10, MemoryPolicy::Shift);
        cfg.mine_every = 1;
        let mut miner = WindowMiner::new(cfg).unwrap().with_filter(|e| e.activity != "noise");
        assert!(miner.observe(&ev(0, "noise")).is_none());
        assert_eq!(miner.retained_entries(), 0);
        assert!(miner.observe(&ev(1, "A")).is_some());
    }
}
