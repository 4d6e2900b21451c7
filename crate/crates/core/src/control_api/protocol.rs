//! Wire types: one JSON object per LF-terminated line.
//!
//! ```text
//! → {"id":1,"verb":"GET_TIME"}
//! ← {"id":1,"status":"OK","payload":{"step":0}}
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verb {
    SimStep,
    GetTime,
    TlList,
    TlGetPlan,
    TlSetPlanPending,
    TlGetCyclePos,
    TlCountNear,
    TlNeighbors,
    VehDrainArrived,
    SetPeriodPlan,
    /// Agent message relay used by out-of-process agent runtimes.
    AgentMsg,
}

impl Verb {
    pub const ALL: [Verb; 11] = [
        Verb::SimStep,
        Verb::GetTime,
        Verb::TlList,
        Verb::TlGetPlan,
        Verb::TlSetPlanPending,
        Verb::TlGetCyclePos,
        Verb::TlCountNear,
        Verb::TlNeighbors,
        Verb::VehDrainArrived,
        Verb::SetPeriodPlan,
        Verb::AgentMsg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::SimStep => "SIM_STEP",
            Verb::GetTime => "GET_TIME",
            Verb::TlList => "TL_LIST",
            Verb::TlGetPlan => "TL_GET_PLAN",
            Verb::TlSetPlanPending => "TL_SET_PLAN_PENDING",
            Verb::TlGetCyclePos => "TL_GET_CYCLE_POS",
            Verb::TlCountNear => "TL_COUNT_NEAR",
            Verb::TlNeighbors => "TL_NEIGHBORS",
            Verb::VehDrainArrived => "VEH_DRAIN_ARRIVED",
            Verb::SetPeriodPlan => "SET_PERIOD_PLAN",
            Verb::AgentMsg => "AGENT_MSG",
        }
    }

    /// Verbs that change simulator or mailbox state; only the controlling
    /// session may issue them.
    pub fn is_mutating(self) -> bool {
        matches!(
            self,
            Verb::SimStep
                | Verb::TlSetPlanPending
                | Verb::SetPeriodPlan
                | Verb::VehDrainArrived
                | Verb::AgentMsg
        )
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Verb::ALL.into_iter().find(|v| v.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub id: i64,
    pub verb: Verb,
    pub args: Option<Value>,
}

impl Command {
    pub fn to_line(&self) -> String {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::from(self.id));
        obj.insert("verb".into(), Value::from(self.verb.as_str()));
        if let Some(args) = &self.args {
            obj.insert("args".into(), args.clone());
        }
        Value::Object(obj).to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Parse,
    Verb,
    Args,
    State,
    PlanInvalid,
    UnknownId,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Parse => "PARSE",
            ErrorCode::Verb => "VERB",
            ErrorCode::Args => "ARGS",
            ErrorCode::State => "STATE",
            ErrorCode::PlanInvalid => "PLAN_INVALID",
            ErrorCode::UnknownId => "UNKNOWN_ID",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Lookup(_) => ErrorCode::UnknownId,
            Error::PlanInvalid(_) | Error::IllegalAction(_) => ErrorCode::PlanInvalid,
            Error::Contract(_) | Error::Format(_) => ErrorCode::Args,
            _ => ErrorCode::State,
        };
        ApiError::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "OK")]
    Ok,
    #[serde(rename = "ERR")]
    Err,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    /// `null` only when a malformed line carried no usable id.
    pub id: Option<i64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

impl Response {
    pub fn ok(id: i64, payload: Value) -> Self {
        Response {
            id: Some(id),
            status: Status::Ok,
            payload: Some(payload),
            error: None,
        }
    }

    pub fn err(id: Option<i64>, error: ApiError) -> Self {
        Response {
            id,
            status: Status::Err,
            payload: None,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serialization cannot fail")
    }

    /// The payload, or the error as [`Error::Api`].
    pub fn into_result(self) -> Result<Value, Error> {
        match (self.status, self.payload, self.error) {
            (Status::Ok, Some(p), _) => Ok(p),
            (Status::Ok, None, _) => Ok(Value::Object(Map::new())),
            (Status::Err, _, Some(e)) => Err(Error::Api {
                code: e.code.as_str().to_string(),
                message: e.message,
            }),
            (Status::Err, _, None) => Err(Error::Api {
                code: "STATE".into(),
                message: "error response without details".into(),
            }),
        }
    }
}

/// Parses one line into a command. Errors carry the command id when it
/// could be recovered.
pub fn parse_command(line: &str) -> Result<Command, (Option<i64>, ApiError)> {
    let value: Value = serde_json::from_str(line).map_err(|e| {
        (
            None,
            ApiError::new(ErrorCode::Parse, format!("invalid JSON: {e}")),
        )
    })?;
    let Value::Object(mut obj) = value else {
        return Err((
            None,
            ApiError::new(ErrorCode::Parse, "command must be a JSON object"),
        ));
    };
    let id = match obj.remove("id") {
        Some(v) => v.as_i64().ok_or_else(|| {
            (
                None,
                ApiError::new(ErrorCode::Parse, "id must be an integer"),
            )
        })?,
        None => return Err((None, ApiError::new(ErrorCode::Parse, "missing id"))),
    };
    let verb = match obj.remove("verb") {
        Some(Value::String(s)) => s,
        Some(_) => {
            return Err((
                Some(id),
                ApiError::new(ErrorCode::Parse, "verb must be a string"),
            ))
        }
        None => return Err((Some(id), ApiError::new(ErrorCode::Parse, "missing verb"))),
    };
    let args = obj.remove("args");
    if let Some(extra) = obj.keys().next() {
        return Err((
            Some(id),
            ApiError::new(ErrorCode::Parse, format!("unexpected field {extra:?}")),
        ));
    }
    let verb = verb.parse::<Verb>().map_err(|_| {
        (
            Some(id),
            ApiError::new(ErrorCode::Verb, format!("unknown verb {verb:?}")),
        )
    })?;
    Ok(Command { id, verb, args })
}
