//! Control surface for traffic-light controllers.
//!
//! Commands run against a [`ControlCore`] either in-process
//! ([`InProcessClient`]) or over newline-delimited JSON on TCP
//! ([`Server`] / [`WireClient`]). Both paths share one dispatcher, so the
//! payloads they return are identical.

mod client;
mod dispatch;
mod protocol;
mod wire;

pub use client::{ControlClient, CycleEnd, InProcessClient, Neighbor, PlanInfo, StepOutcome};
pub use dispatch::{ControlCore, Role, Session, SharedCore};
pub use protocol::{parse_command, ApiError, Command, ErrorCode, Response, Status, Verb};
pub use wire::{Server, WireClient};
