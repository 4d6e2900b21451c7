use std::collections::{BTreeMap, HashMap};

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::message::{AgentMessage, MessageTransport, Performative};
use super::qlearning::{
    enumerate_states, legal_actions, q_update, select_action, QAction, QState, QTable,
};
use super::reward::{combined_reward, own_reward};
use super::{AgentConfig, DayPeriod, Variant};
use crate::control_api::{ControlClient, Neighbor, StepOutcome};
use crate::error::{Error, Result};

/// What one agent did at the end of one of its cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub agent: String,
    /// 1-based index of the completed cycle.
    pub cycle: u64,
    /// First step of the next cycle.
    pub step: u64,
    pub own_reward: f64,
    pub combined_reward: f64,
    /// Neighbors polled with `QUERY_REF`.
    pub polled: usize,
    /// `INFORM_REF` replies received.
    pub replies: usize,
    /// Value written by the Q-update, if one happened.
    pub updated_q: Option<f64>,
    pub action: QAction,
    pub durations: Vec<u32>,
}

/// One traffic light's learner.
#[derive(Debug, Clone)]
pub struct TrafficLightAgent {
    name: String,
    neighbors: Vec<Neighbor>,
    table: QTable,
    rng: ChaCha8Rng,
    durations: Vec<u32>,
    samples: Vec<f64>,
    last_own: Option<f64>,
    previous: Option<(QState, QAction)>,
    cycles: u64,
}

impl TrafficLightAgent {
    pub fn new(
        name: String,
        neighbors: Vec<Neighbor>,
        durations: Vec<u32>,
        rng: ChaCha8Rng,
    ) -> Self {
        TrafficLightAgent {
            name,
            neighbors,
            table: QTable::new(),
            rng,
            durations,
            samples: Vec::new(),
            last_own: None,
            previous: None,
            cycles: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn durations(&self) -> &[u32] {
        &self.durations
    }

    /// Own reward of the most recently completed cycle.
    pub fn last_own_reward(&self) -> Option<f64> {
        self.last_own
    }

    pub fn completed_cycles(&self) -> u64 {
        self.cycles
    }
}

/// Per-agent RNG: the run seed with the agent's ordinal as stream. Stream 0
/// is left to demand generation.
pub fn agent_rng(seed: u64, ordinal: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ordinal as u64 + 1);
    rng
}

struct OpenTick {
    agent: usize,
    conversation: String,
    own: f64,
    replies: BTreeMap<String, f64>,
}

/// Drives every traffic-light agent from outside the engine. Call
/// [`after_step`](Self::after_step) after every `SIM_STEP`; all agent work for
/// that window completes before it returns.
pub struct AgentRuntime {
    config: AgentConfig,
    agents: Vec<TrafficLightAgent>,
    by_name: HashMap<String, usize>,
    bus: Box<dyn MessageTransport>,
}

impl std::fmt::Debug for AgentRuntime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentRuntime")
            .field("config", &self.config)
            .field("agents", &self.agents)
            .field("bus", &self.bus.stats())
            .finish()
    }
}

impl AgentRuntime {
    /// Creates one agent per traffic light, discovering neighbors and
    /// current durations through `client`.
    pub fn connect(
        client: &mut dyn ControlClient,
        config: AgentConfig,
        seed: u64,
        bus: Box<dyn MessageTransport>,
    ) -> Result<Self> {
        config.validate()?;
        let mut agents = Vec::new();
        let mut by_name = HashMap::new();
        for (i, tl) in client.tl_list()?.into_iter().enumerate() {
            let neighbors = client.neighbors(&tl)?;
            let durations = client.plan(&tl)?.durations;
            enumerate_states(durations.len(), config.variant)?;
            by_name.insert(tl.clone(), i);
            agents.push(TrafficLightAgent::new(
                tl,
                neighbors,
                durations,
                agent_rng(seed, i),
            ));
        }
        Ok(AgentRuntime {
            config,
            agents,
            by_name,
            bus,
        })
    }

    pub fn agents(&self) -> &[TrafficLightAgent] {
        &self.agents
    }

    pub fn agent(&self, name: &str) -> Option<&TrafficLightAgent> {
        self.by_name.get(name).map(|&i| &self.agents[i])
    }

    pub fn bus(&self) -> &dyn MessageTransport {
        self.bus.as_ref()
    }

    /// Samples every agent's vicinity and runs the cycle-end behaviour of the
    /// agents listed in `outcome.cycle_ends`. `period` is required for
    /// variant B.
    pub fn after_step(
        &mut self,
        client: &mut dyn ControlClient,
        outcome: &StepOutcome,
        period: Option<DayPeriod>,
    ) -> Result<Vec<TickRecord>> {
        for agent in &mut self.agents {
            let count = client.count_near(&agent.name)?;
            agent.samples.push(count);
        }
        if outcome.cycle_ends.is_empty() {
            return Ok(Vec::new());
        }
        let period = match self.config.variant {
            Variant::A => None,
            Variant::B => {
                Some(period.ok_or_else(|| Error::Config("variant B needs the day period".into()))?)
            }
        };

        let mut ticking: Vec<usize> = outcome
            .cycle_ends
            .iter()
            .map(|c| {
                self.by_name
                    .get(&c.tl)
                    .copied()
                    .ok_or_else(|| Error::Lookup(format!("cycle end for unknown agent {}", c.tl)))
            })
            .collect::<Result<_>>()?;
        ticking.sort_unstable();
        ticking.dedup();

        // Score the finished cycle of every ticking agent before any reply
        // goes out, so replies carry this window's rewards.
        let mut open = Vec::with_capacity(ticking.len());
        for &i in &ticking {
            let agent = &mut self.agents[i];
            let own = own_reward(&agent.samples)?;
            agent.samples.clear();
            agent.last_own = Some(own);
            agent.cycles += 1;
            open.push(OpenTick {
                agent: i,
                conversation: format!("{}:{}", agent.name, agent.cycles),
                own,
                replies: BTreeMap::new(),
            });
        }
        for tick in &open {
            let agent = &self.agents[tick.agent];
            for n in &agent.neighbors {
                let q = AgentMessage::query(&agent.name, &n.tl, &tick.conversation);
                self.bus.send(q, client)?;
            }
        }
        self.deliver(client, &mut open)?;

        let step = outcome.step;
        let mut records = Vec::with_capacity(open.len());
        for tick in open {
            records.push(self.finish_tick(client, tick, step, period)?);
        }
        Ok(records)
    }

    /// Routes messages until no mailbox has anything left.
    fn deliver(&mut self, client: &mut dyn ControlClient, open: &mut [OpenTick]) -> Result<()> {
        loop {
            let mut moved = false;
            for i in 0..self.agents.len() {
                let inbox = self.bus.receive(&self.agents[i].name, client)?;
                for msg in inbox {
                    moved = true;
                    match msg.performative {
                        Performative::QueryRef => match self.agents[i].last_own {
                            Some(r) => self.bus.send(AgentMessage::inform(&msg, r), client)?,
                            None => debug!(
                                "{} has no reward yet for {}",
                                self.agents[i].name, msg.sender
                            ),
                        },
                        Performative::InformRef => {
                            let tick = open
                                .iter_mut()
                                .find(|t| t.conversation == msg.conversation && t.agent == i)
                                .ok_or_else(|| {
                                    Error::Contract(format!(
                                        "uncorrelated INFORM_REF {}",
                                        msg.conversation
                                    ))
                                })?;
                            let r = msg.reward().ok_or_else(|| {
                                Error::Contract("INFORM_REF without reward".into())
                            })?;
                            tick.replies.insert(msg.sender, r);
                        }
                    }
                }
            }
            if !moved {
                return Ok(());
            }
        }
    }

    fn finish_tick(
        &mut self,
        client: &mut dyn ControlClient,
        tick: OpenTick,
        step: u64,
        period: Option<DayPeriod>,
    ) -> Result<TickRecord> {
        let cfg = self.config;
        let agent = &mut self.agents[tick.agent];
        let mut neighbor_rewards = Vec::with_capacity(agent.neighbors.len());
        for n in &agent.neighbors {
            match tick.replies.get(&n.tl) {
                Some(&r) => neighbor_rewards.push((r, n.distance)),
                None => warn!(
                    "{}: no reward from {} for {}",
                    agent.name, n.tl, tick.conversation
                ),
            }
        }
        let combined = combined_reward(
            tick.own,
            &neighbor_rewards,
            cfg.own_weight,
            cfg.neighbor_weight,
            cfg.weighting,
        )?;

        let state = QState::new(agent.durations.clone(), period);
        let legal = legal_actions(cfg.action_mode, &agent.durations);
        let updated_q = agent.previous.take().map(|(s, a)| {
            q_update(
                &mut agent.table,
                &s,
                &a,
                combined,
                &state,
                &legal,
                cfg.alpha,
                cfg.gamma,
            )
        });
        let action = select_action(&agent.table, &state, &legal, cfg.epsilon, &mut agent.rng)?;
        let next: Vec<u32> = agent
            .durations
            .iter()
            .zip(action.deltas(agent.durations.len()))
            .map(|(&d, delta)| (d as i64 + delta as i64) as u32)
            .collect();
        client.set_durations(&agent.name, &next)?;
        agent.durations = next.clone();
        agent.previous = Some((state, action.clone()));
        Ok(TickRecord {
            agent: agent.name.clone(),
            cycle: agent.cycles,
            step,
            own_reward: tick.own,
            combined_reward: combined,
            polled: agent.neighbors.len(),
            replies: neighbor_rewards.len(),
            updated_q,
            action,
            durations: next,
        })
    }
}
