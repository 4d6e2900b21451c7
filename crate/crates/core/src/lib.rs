//! Multi-agent traffic-light control simulator.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: grid road networks, neighbor queries and routing.
//! - [`signal`]: semaphore plans, phases and day-period plan sets.
//! - [`sim`]: the deterministic step-based queue simulator.
//! - [`control_api`]: the command surface used by traffic-light controllers,
//!   both in-process and as newline-delimited JSON over TCP.
//! - [`agents`]: tabular Q-learning traffic-light agents exchanging rewards
//!   over a performative message bus.
//! - [`metrics`]: per-vehicle records, run aggregates and CSV export.
//! - [`scenario`]: daily traffic schedule, demand generation, experiment
//!   configuration and orchestration.

pub mod agents;
pub mod control_api;
pub mod error;
pub mod metrics;
pub mod network;
pub mod scenario;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
