//! Streaming Heuristics Miner.
//!
//! Discovers causal process models from an unbounded stream of events using
//! bounded memory. Five miners share the [`StreamMiner`] interface:
//!
//! * [`WindowMiner`] reruns batch Heuristics Miner over a reset or sliding
//!   buffer of raw events;
//! * [`OnlineMiner`] keeps activity, case and relation queues, optionally
//!   aging their weights with a fixed or self-adapting factor;
//! * [`LossyMiner`] approximates the counters with Lossy Counting.
//!
//! Around them sit the measures and model builder ([`metrics`]), replay-style
//! evaluation, Hoeffding error bounds, a synthetic log generator, a network
//! stream source and the experiment harness.

pub mod bounds;
pub mod error;
pub mod evaluation;
pub mod event;
pub mod harness;
pub mod lossy;
pub mod metrics;
pub mod miner;
pub mod net;
pub mod online;
pub mod synth;
pub mod window;

pub use error::{Error, Result};
pub use event::{Event, MemoryPolicy, ObservationPeriod};
pub use lossy::{LossyConfig, LossyMiner};
pub use metrics::{generate_model, CausalModel, SuccessionCounts, Thresholds};
pub use miner::{MinerKind, StreamMiner};
pub use net::Codec;
pub use online::{OnlineConfig, OnlineMiner, WeightPolicy};
pub use window::{WindowMiner, WindowMinerConfig};
