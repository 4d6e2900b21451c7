use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};

use serde_json::{json, Map, Value};

use super::protocol::{parse_command, ApiError, Command, ErrorCode, Response, Verb};
use crate::agents::{AgentMessage, DayPeriod};
use crate::network::JunctionId;
use crate::signal::SemaphorePlan;
use crate::sim::Engine;

/// Upper bound on `SIM_STEP` batch size.
const MAX_BATCH: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// May step the engine and change plans.
    Controller,
    /// Read-only queries.
    Observer,
}

/// Per-connection protocol state.
#[derive(Debug)]
pub struct Session {
    role: Role,
    seen: HashSet<i64>,
}

impl Session {
    pub fn new(role: Role) -> Self {
        Session {
            role,
            seen: HashSet::new(),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

/// The engine behind the command surface, plus agent mailboxes for the
/// `AGENT_MSG` relay. All commands execute serially against it.
#[derive(Debug)]
pub struct ControlCore {
    engine: Engine,
    mailboxes: BTreeMap<String, VecDeque<AgentMessage>>,
}

pub type SharedCore = Arc<Mutex<ControlCore>>;

type Outcome = Result<Value, ApiError>;

fn args_error(msg: impl Into<String>) -> ApiError {
    ApiError::new(ErrorCode::Args, msg)
}

fn arg_str<'a>(args: &'a Map<String, Value>, key: &str) -> Result<&'a str, ApiError> {
    match args.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(args_error(format!("{key} must be a string"))),
        None => Err(args_error(format!("missing argument {key}"))),
    }
}

impl ControlCore {
    pub fn new(engine: Engine) -> Self {
        ControlCore {
            engine,
            mailboxes: BTreeMap::new(),
        }
    }

    pub fn shared(engine: Engine) -> SharedCore {
        Arc::new(Mutex::new(Self::new(engine)))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }

    /// Parses and executes one protocol line.
    pub fn handle_line(&mut self, session: &mut Session, line: &str) -> Response {
        match parse_command(line) {
            Ok(cmd) => self.execute(session, cmd),
            Err((id, e)) => Response::err(id, e),
        }
    }

    pub fn execute(&mut self, session: &mut Session, cmd: Command) -> Response {
        if !session.seen.insert(cmd.id) {
            return Response::err(
                Some(cmd.id),
                args_error(format!("duplicate command id {}", cmd.id)),
            );
        }
        if cmd.verb.is_mutating() && session.role != Role::Controller {
            return Response::err(
                Some(cmd.id),
                ApiError::new(
                    ErrorCode::State,
                    format!("{} requires the controlling session", cmd.verb),
                ),
            );
        }
        let empty = Map::new();
        let args = match &cmd.args {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => return Response::err(Some(cmd.id), args_error("args must be an object")),
        };
        match self.dispatch(cmd.verb, args) {
            Ok(payload) => Response::ok(cmd.id, payload),
            Err(e) => Response::err(Some(cmd.id), e),
        }
    }

    fn dispatch(&mut self, verb: Verb, args: &Map<String, Value>) -> Outcome {
        match verb {
            Verb::SimStep => self.sim_step(args),
            Verb::GetTime => Ok(json!({ "step": self.engine.now() })),
            Verb::TlList => {
                let tls: Vec<&str> = self
                    .engine
                    .network()
                    .signalized()
                    .map(|j| j.name.as_str())
                    .collect();
                Ok(json!({ "tls": tls }))
            }
            Verb::TlGetPlan => self.get_plan(args),
            Verb::TlSetPlanPending => self.set_plan_pending(args),
            Verb::TlGetCyclePos => self.cycle_pos(args),
            Verb::TlCountNear => {
                let (_, j) = self.tl(args)?;
                Ok(json!({ "count": self.engine.vehicle_count_near(j)? }))
            }
            Verb::TlNeighbors => {
                let (name, j) = self.tl(args)?;
                let net = self.engine.network();
                let neighbors: Vec<Value> = net
                    .neighbors_of(j)?
                    .into_iter()
                    .map(|(n, d)| json!({ "tl": net.junctions()[n.0].name, "distance": d }))
                    .collect();
                Ok(json!({ "tl": name, "neighbors": neighbors }))
            }
            Verb::VehDrainArrived => {
                let records = self.engine.arrived_vehicles();
                Ok(json!({ "vehicles": records }))
            }
            Verb::SetPeriodPlan => {
                let (name, j) = self.tl(args)?;
                let period: DayPeriod = arg_str(args, "period")?
                    .parse()
                    .map_err(|e: crate::Error| args_error(e.to_string()))?;
                let effective = self.engine.set_period_plan(j, period)?;
                Ok(json!({ "tl": name, "period": period.to_string(), "effective_step": effective }))
            }
            Verb::AgentMsg => self.agent_msg(args),
        }
    }

    fn tl(&self, args: &Map<String, Value>) -> Result<(String, JunctionId), ApiError> {
        let name = arg_str(args, "tl")?;
        let net = self.engine.network();
        match net.junction_by_name(name) {
            Ok(j) if net.junctions()[j.0].signalized => Ok((name.to_string(), j)),
            _ => Err(ApiError::new(
                ErrorCode::UnknownId,
                format!("unknown traffic light {name:?}"),
            )),
        }
    }

    fn sim_step(&mut self, args: &Map<String, Value>) -> Outcome {
        let steps = match args.get("steps") {
            None => 1,
            Some(v) => v
                .as_u64()
                .filter(|n| (1..=MAX_BATCH).contains(n))
                .ok_or_else(|| {
                    args_error(format!("steps must be an integer in 1..={MAX_BATCH}"))
                })?,
        };
        if let Some(max) = self.engine.config().max_steps {
            if self.engine.now() + steps > max {
                return Err(ApiError::new(
                    ErrorCode::State,
                    format!("cannot step past the horizon at step {max}"),
                ));
            }
        }
        let mut arrived = 0;
        let mut cycle_ends = Vec::new();
        for _ in 0..steps {
            let report = self.engine.step()?;
            arrived += report.arrivals.len();
            let net = self.engine.network();
            cycle_ends.extend(
                report
                    .cycle_ends
                    .iter()
                    .map(|j| json!({ "tl": net.junctions()[j.0].name, "step": report.step + 1 })),
            );
        }
        Ok(json!({ "step": self.engine.now(), "arrived": arrived, "cycle_ends": cycle_ends }))
    }

    fn get_plan(&self, args: &Map<String, Value>) -> Outcome {
        let (name, j) = self.tl(args)?;
        let signal = self.engine.signal(j)?;
        Ok(json!({
            "tl": name,
            "plan": signal.active,
            "pending": signal.pending,
            "durations": signal.active.variable_durations(),
        }))
    }

    fn set_plan_pending(&mut self, args: &Map<String, Value>) -> Outcome {
        let (name, j) = self.tl(args)?;
        let signal = self.engine.signal(j)?;
        let base = signal.pending.as_ref().unwrap_or(&signal.active);
        let plan = match (args.get("durations"), args.get("plan")) {
            (Some(d), None) => {
                let durations: Vec<u32> = d
                    .as_array()
                    .and_then(|a| {
                        a.iter()
                            .map(|v| v.as_u64().and_then(|n| u32::try_from(n).ok()))
                            .collect()
                    })
                    .ok_or_else(|| {
                        args_error("durations must be an array of non-negative integers")
                    })?;
                if durations.len() != base.variable_count() {
                    return Err(args_error(format!(
                        "{} durations given for {} variable phases",
                        durations.len(),
                        base.variable_count()
                    )));
                }
                base.with_variable_durations(&durations)?
            }
            (None, Some(p)) => serde_json::from_value::<SemaphorePlan>(p.clone())
                .map_err(|e| ApiError::new(ErrorCode::PlanInvalid, e.to_string()))?,
            _ => return Err(args_error("exactly one of durations or plan is required")),
        };
        let durations = plan.variable_durations();
        let effective = self.engine.set_pending_plan(j, plan)?;
        Ok(json!({ "tl": name, "durations": durations, "effective_step": effective }))
    }

    fn cycle_pos(&self, args: &Map<String, Value>) -> Outcome {
        let (name, j) = self.tl(args)?;
        let signal = self.engine.signal(j)?;
        let now = self.engine.now();
        let t = signal.time_in_cycle(now);
        Ok(json!({
            "tl": name,
            "step": now,
            "cycle_start": signal.cycle_start_step,
            "cycle_length": signal.active.cycle_length(),
            "time_in_cycle": t,
            "phase": signal.active.current_phase(t)?,
        }))
    }

    fn agent_msg(&mut self, args: &Map<String, Value>) -> Outcome {
        if let Some(agent) = args.get("poll") {
            let agent = agent
                .as_str()
                .ok_or_else(|| args_error("poll must be a string"))?;
            self.tl(&Map::from_iter([("tl".to_string(), Value::from(agent))]))?;
            let messages: Vec<AgentMessage> = self
                .mailboxes
                .get_mut(agent)
                .map(|q| q.drain(..).collect())
                .unwrap_or_default();
            return Ok(json!({ "messages": messages }));
        }
        let msg: AgentMessage = serde_json::from_value(Value::Object(args.clone()))
            .map_err(|e| args_error(e.to_string()))?;
        msg.validate().map_err(|e| args_error(e.to_string()))?;
        for who in [&msg.sender, &msg.receiver] {
            self.tl(&Map::from_iter([(
                "tl".to_string(),
                Value::from(who.as_str()),
            )]))?;
        }
        self.mailboxes
            .entry(msg.receiver.clone())
            .or_default()
            .push_back(msg);
        Ok(json!({ "queued": true }))
    }
}
