use std::sync::PoisonError;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::dispatch::{ControlCore, Role, Session, SharedCore};
use super::protocol::{Command, Response, Verb};
use crate::agents::DayPeriod;
use crate::error::{Error, Result};
use crate::metrics::VehicleRecord;
use crate::signal::SemaphorePlan;

/// A traffic light whose cycle ended during a `SIM_STEP`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleEnd {
    pub tl: String,
    /// First step of the new cycle.
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: u64,
    pub arrived: usize,
    pub cycle_ends: Vec<CycleEnd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub tl: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanInfo {
    pub tl: String,
    pub plan: SemaphorePlan,
    pub pending: Option<SemaphorePlan>,
    pub durations: Vec<u32>,
}

fn decode<T: serde::de::DeserializeOwned>(payload: Value) -> Result<T> {
    serde_json::from_value(payload).map_err(|e| Error::Format(format!("unexpected payload: {e}")))
}

fn field<T: serde::de::DeserializeOwned>(mut payload: Value, key: &str) -> Result<T> {
    let v = payload
        .get_mut(key)
        .map(Value::take)
        .ok_or_else(|| Error::Format(format!("payload without {key}")))?;
    decode(v)
}

/// The command surface, independent of transport.
pub trait ControlClient: Send {
    /// Sends one command and returns its response; the id is chosen by the client.
    fn call(&mut self, verb: Verb, args: Option<Value>) -> Result<Response>;

    /// Like [`call`](Self::call), mapping `ERR` responses to [`Error::Api`].
    fn request(&mut self, verb: Verb, args: Value) -> Result<Value> {
        let args = if args.is_null() { None } else { Some(args) };
        self.call(verb, args)?.into_result()
    }

    fn sim_step(&mut self, steps: u64) -> Result<StepOutcome> {
        decode(self.request(Verb::SimStep, json!({ "steps": steps }))?)
    }

    fn time(&mut self) -> Result<u64> {
        field(self.request(Verb::GetTime, Value::Null)?, "step")
    }

    fn tl_list(&mut self) -> Result<Vec<String>> {
        field(self.request(Verb::TlList, Value::Null)?, "tls")
    }

    fn plan(&mut self, tl: &str) -> Result<PlanInfo> {
        decode(self.request(Verb::TlGetPlan, json!({ "tl": tl }))?)
    }

    /// Returns the step from which the durations govern.
    fn set_durations(&mut self, tl: &str, durations: &[u32]) -> Result<u64> {
        field(
            self.request(
                Verb::TlSetPlanPending,
                json!({ "tl": tl, "durations": durations }),
            )?,
            "effective_step",
        )
    }

    fn set_plan(&mut self, tl: &str, plan: &SemaphorePlan) -> Result<u64> {
        field(
            self.request(Verb::TlSetPlanPending, json!({ "tl": tl, "plan": plan }))?,
            "effective_step",
        )
    }

    fn count_near(&mut self, tl: &str) -> Result<f64> {
        field(
            self.request(Verb::TlCountNear, json!({ "tl": tl }))?,
            "count",
        )
    }

    fn neighbors(&mut self, tl: &str) -> Result<Vec<Neighbor>> {
        field(
            self.request(Verb::TlNeighbors, json!({ "tl": tl }))?,
            "neighbors",
        )
    }

    fn drain_arrived(&mut self) -> Result<Vec<VehicleRecord>> {
        field(
            self.request(Verb::VehDrainArrived, Value::Null)?,
            "vehicles",
        )
    }

    fn set_period_plan(&mut self, tl: &str, period: DayPeriod) -> Result<u64> {
        field(
            self.request(
                Verb::SetPeriodPlan,
                json!({ "tl": tl, "period": period.to_string() }),
            )?,
            "effective_step",
        )
    }
}

/// Executes commands directly against a shared core, without serialization.
#[derive(Debug)]
pub struct InProcessClient {
    core: SharedCore,
    session: Session,
    next_id: i64,
}

impl InProcessClient {
    pub fn new(core: SharedCore) -> Self {
        Self::with_role(core, Role::Controller)
    }

    pub fn with_role(core: SharedCore, role: Role) -> Self {
        InProcessClient {
            core,
            session: Session::new(role),
            next_id: 1,
        }
    }

    pub fn core(&self) -> &SharedCore {
        &self.core
    }

    /// Executes a command with a caller-chosen id. Later automatic ids skip past it.
    pub fn execute(&mut self, cmd: Command) -> Response {
        self.next_id = self.next_id.max(cmd.id.saturating_add(1));
        let mut core = self.core.lock().unwrap_or_else(PoisonError::into_inner);
        ControlCore::execute(&mut core, &mut self.session, cmd)
    }
}

impl ControlClient for InProcessClient {
    fn call(&mut self, verb: Verb, args: Option<Value>) -> Result<Response> {
        let id = self.next_id;
        self.next_id += 1;
        Ok(self.execute(Command { id, verb, args }))
    }
}
