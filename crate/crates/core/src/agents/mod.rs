//! Q-learning traffic-light agents with distributed reward exchange.
//!
//! Each signalized junction is driven by one agent. At the end of every
//! cycle the agent scores the cycle by its mean vicinity count, polls its
//! neighbors for their latest own reward (`QUERY_REF` / `INFORM_REF`),
//! blends the two, updates its Q-table and picks the next duration change.

mod message;
mod qlearning;
mod reward;
mod runtime;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use message::{
    AgentMessage, BusStats, InProcessBus, MessageContent, MessageTransport, Performative, RelayBus,
    REWARD_QUERY,
};
pub use qlearning::{
    enumerate_states, legal_actions, q_update, select_action, state_action_pairs, ActionMode,
    QAction, QState, QTable,
};
pub use reward::{combined_reward, own_reward, NeighborWeighting};
pub use runtime::{agent_rng, AgentRuntime, TickRecord, TrafficLightAgent};

/// Traffic band of the daily schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayPeriod {
    Low,
    Medium,
    High,
}

impl DayPeriod {
    pub const ALL: [DayPeriod; 3] = [DayPeriod::Low, DayPeriod::Medium, DayPeriod::High];
}

impl fmt::Display for DayPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DayPeriod::Low => "Low",
            DayPeriod::Medium => "Medium",
            DayPeriod::High => "High",
        })
    }
}

impl FromStr for DayPeriod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(DayPeriod::Low),
            "medium" => Ok(DayPeriod::Medium),
            "high" => Ok(DayPeriod::High),
            _ => Err(Error::Config(format!("unknown day period {s:?}"))),
        }
    }
}

/// Whether the learning state includes the day period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Phase durations only.
    A,
    /// Phase durations and day period.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub own_weight: f64,
    pub neighbor_weight: f64,
    pub variant: Variant,
    pub action_mode: ActionMode,
    pub weighting: NeighborWeighting,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: 0.5,
            gamma: 0.5,
            epsilon: 0.0,
            own_weight: 0.5,
            neighbor_weight: 0.5,
            variant: Variant::A,
            action_mode: ActionMode::Uniform,
            weighting: NeighborWeighting::InverseDistance,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.own_weight < 0.0
            || self.neighbor_weight < 0.0
            || (self.own_weight + self.neighbor_weight - 1.0).abs() > 1e-12
        {
            return Err(Error::Config(format!(
                "own_weight + neighbor_weight must equal 1 (got {} + {})",
                self.own_weight, self.neighbor_weight
            )));
        }
        Ok(())
    }
}
