use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::control_api::{ControlClient, Verb};
use crate::error::{Error, Result};

/// Content of every reward request.
pub const REWARD_QUERY: &str = "reward";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Performative {
    QueryRef,
    InformRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageContent {
    Reward(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMessage {
    pub performative: Performative,
    pub sender: String,
    pub receiver: String,
    pub conversation: String,
    pub content: MessageContent,
}

impl AgentMessage {
    pub fn query(sender: &str, receiver: &str, conversation: &str) -> Self {
        AgentMessage {
            performative: Performative::QueryRef,
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            conversation: conversation.to_string(),
            content: MessageContent::Text(REWARD_QUERY.to_string()),
        }
    }

    /// Answer to `query` carrying `reward`.
    pub fn inform(query: &AgentMessage, reward: f64) -> Self {
        AgentMessage {
            performative: Performative::InformRef,
            sender: query.receiver.clone(),
            receiver: query.sender.clone(),
            conversation: query.conversation.clone(),
            content: MessageContent::Reward(reward),
        }
    }

    /// Checks the content matches the performative.
    pub fn validate(&self) -> Result<()> {
        match (&self.performative, &self.content) {
            (Performative::QueryRef, MessageContent::Text(t)) if t == REWARD_QUERY => Ok(()),
            (Performative::InformRef, MessageContent::Reward(r)) if r.is_finite() => Ok(()),
            (p, c) => Err(Error::Contract(format!("{p:?} cannot carry {c:?}"))),
        }
    }

    pub fn reward(&self) -> Option<f64> {
        match (&self.performative, &self.content) {
            (Performative::InformRef, MessageContent::Reward(r)) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusStats {
    pub queries: u64,
    pub informs: u64,
}

/// Delivery of agent messages. Transports that relay through the control
/// surface use `client`; the in-process bus ignores it.
pub trait MessageTransport: Send {
    fn send(&mut self, msg: AgentMessage, client: &mut dyn ControlClient) -> Result<()>;
    /// Removes and returns every message addressed to `agent`, in send order.
    fn receive(&mut self, agent: &str, client: &mut dyn ControlClient)
        -> Result<Vec<AgentMessage>>;
    fn stats(&self) -> BusStats;
    /// Every message sent so far, when tracing is enabled.
    fn trace(&self) -> Option<&[AgentMessage]> {
        None
    }
}

fn count(stats: &mut BusStats, msg: &AgentMessage) {
    match msg.performative {
        Performative::QueryRef => stats.queries += 1,
        Performative::InformRef => stats.informs += 1,
    }
}

/// Mailboxes in memory; FIFO per receiver, hence per sender.
#[derive(Debug, Default)]
pub struct InProcessBus {
    mailboxes: BTreeMap<String, VecDeque<AgentMessage>>,
    stats: BusStats,
    trace: Option<Vec<AgentMessage>>,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// A bus that records every message it carries.
    pub fn traced() -> Self {
        InProcessBus {
            trace: Some(Vec::new()),
            ..Self::default()
        }
    }
}

impl MessageTransport for InProcessBus {
    fn send(&mut self, msg: AgentMessage, _client: &mut dyn ControlClient) -> Result<()> {
        msg.validate()?;
        count(&mut self.stats, &msg);
        if let Some(t) = self.trace.as_mut() {
            t.push(msg.clone());
        }
        self.mailboxes
            .entry(msg.receiver.clone())
            .or_default()
            .push_back(msg);
        Ok(())
    }

    fn receive(
        &mut self,
        agent: &str,
        _client: &mut dyn ControlClient,
    ) -> Result<Vec<AgentMessage>> {
        Ok(self
            .mailboxes
            .get_mut(agent)
            .map(|q| q.drain(..).collect())
            .unwrap_or_default())
    }

    fn stats(&self) -> BusStats {
        self.stats
    }

    fn trace(&self) -> Option<&[AgentMessage]> {
        self.trace.as_deref()
    }
}

/// Carries messages through the control server's `AGENT_MSG` mailboxes, for
/// agent runtimes living in another process.
#[derive(Debug, Default)]
pub struct RelayBus {
    stats: BusStats,
}

impl RelayBus {
    pub fn new() -> Self {
        Self::default()
    }
}

impl MessageTransport for RelayBus {
    fn send(&mut self, msg: AgentMessage, client: &mut dyn ControlClient) -> Result<()> {
        msg.validate()?;
        let args = serde_json::to_value(&msg).map_err(|e| Error::Format(e.to_string()))?;
        client.request(Verb::AgentMsg, args)?;
        count(&mut self.stats, &msg);
        Ok(())
    }

    fn receive(
        &mut self,
        agent: &str,
        client: &mut dyn ControlClient,
    ) -> Result<Vec<AgentMessage>> {
        let payload = client.request(Verb::AgentMsg, json!({ "poll": agent }))?;
        let messages = payload
            .get("messages")
            .cloned()
            .ok_or_else(|| Error::Format("AGENT_MSG poll without messages".into()))?;
        serde_json::from_value(messages).map_err(|e| Error::Format(e.to_string()))
    }

    fn stats(&self) -> BusStats {
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let q = AgentMessage::query("J_0_0", "J_0_1", "J_0_0:3");
        assert_eq!(
            serde_json::to_string(&q).unwrap(),
            r#"{"performative":"QUERY_REF","sender":"J_0_0","receiver":"J_0_1","conversation":"J_0_0:3","content":"reward"}"#
        );
        let r = AgentMessage::inform(&q, -2.5);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"performative":"INFORM_REF","sender":"J_0_1","receiver":"J_0_0","conversation":"J_0_0:3","content":-2.5}"#
        );
        let back: AgentMessage = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.reward(), Some(-2.5));
    }

    #[test]
    fn validation() {
        let q = AgentMessage::query("a", "b", "a:1");
        assert!(q.validate().is_ok());
        let mut wrong = q.clone();
        wrong.content = MessageContent::Text("queue".into());
        assert!(wrong.validate().is_err());
        let mut inform_text = AgentMessage::inform(&q, 1.0);
        inform_text.content = MessageContent::Text("reward".into());
        assert!(inform_text.validate().is_err());
    }
}
