//! Simulation and exact analysis of a queue-driven distributed medium access
//! protocol on interference graphs.
//!
//! - [`graph`]: interference graphs, independent sets, capacity region.
//! - [`protocol`]: per-node weights, counters and attempt rules.
//! - [`simulator`]: slotted network simulation and trace output.
//! - [`schedulers`]: baseline policies.
//! - [`chain`]: exact analysis of the fixed-weight schedule chain.
//! - [`diagnostics`]: potential function, drift, stability classification.
//! - [`config`]: JSON experiment configuration.

pub mod chain;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod protocol;
pub mod rng;
pub mod schedulers;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{ArrivalRates, IndependentSet, InterferenceGraph};
pub use protocol::GParams;
pub use schedulers::SchedulerKind;
pub use simulator::{RunSummary, RunTrace, SimConfig, Simulator};
