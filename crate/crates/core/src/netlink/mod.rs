//! Agent and device messaging over MQTT-style topics.
//!
//! The RAA service consumes `utterance_scored` events and answers each one
//! with a chain of three events (`raa_result`, `display_update`,
//! `robot_action`) whose ids extend the triggering id. Delivery is
//! at-least-once, so every endpoint deduplicates by event id and
//! acknowledges only after its effect is durable.

mod broker;
mod endpoint;
mod sim;
mod store;

pub use broker::{Broker, BrokerClient, DeliveryFaults, WireRecord};
pub use endpoint::{
    expected_actions, process_next, serve, CrashPoint, DeviceRole, DeviceSim, Endpoint, Handled, RaaService,
};
pub use sim::{run_class_simulation, run_with_faults, ClassConfig, ClassRun, FaultPlan, ScoreDistribution};
pub use store::{session_rows, FileStore, MemoryStore, Roster, SessionStore};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raa::{RaaError, RaaMessage, Recognition};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("unknown event kind '{0}'")]
    UnknownKind(String),
    #[error("broker disconnected: {0}")]
    BrokerDisconnected(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("session store: {0}")]
    Store(String),
    #[error(transparent)]
    Raa(#[from] RaaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Raised by fault injection to stop a handler mid-way.
    #[error("endpoint crashed at {0:?}")]
    Crashed(CrashPoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    UtteranceScored,
    RaaResult,
    DisplayUpdate,
    RobotAction,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::UtteranceScored,
        EventKind::RaaResult,
        EventKind::DisplayUpdate,
        EventKind::RobotAction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::UtteranceScored => "utterance_scored",
            EventKind::RaaResult => "raa_result",
            EventKind::DisplayUpdate => "display_update",
            EventKind::RobotAction => "robot_action",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Topic suffix under `aifml/{class_id}/`.
    fn topic_suffix(self) -> &'static str {
        match self {
            EventKind::UtteranceScored => "utterance",
            EventKind::RaaResult => "raa/result",
            EventKind::DisplayUpdate => "display",
            EventKind::RobotAction => "robot/action",
        }
    }
}

/// What the robot is told to do; one per RAA message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobotAction {
    SayCongrats,
    SayTryAgain,
    SayCheerUp,
}

impl RobotAction {
    pub fn for_message(m: RaaMessage) -> Self {
        match m {
            RaaMessage::Congratulations => RobotAction::SayCongrats,
            RaaMessage::TryAgain => RobotAction::SayTryAgain,
            RaaMessage::CheerUp => RobotAction::SayCheerUp,
        }
    }

    pub fn message(self) -> RaaMessage {
        match self {
            RobotAction::SayCongrats => RaaMessage::Congratulations,
            RobotAction::SayTryAgain => RaaMessage::TryAgain,
            RobotAction::SayCheerUp => RaaMessage::CheerUp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RobotAction::SayCongrats => "say_congrats",
            RobotAction::SayTryAgain => "say_try_again",
            RobotAction::SayCheerUp => "say_cheer_up",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [RobotAction::SayCongrats, RobotAction::SayTryAgain, RobotAction::SayCheerUp]
            .into_iter()
            .find(|a| a.as_str() == s)
    }
}

/// Kind-specific part of an event.
#[derive(Debug, Clone, PartialEq)]
pub enum EventBody {
    UtteranceScored {
        fuzzy_score: f64,
    },
    RaaResult {
        fuzzy_score: f64,
        recognition: Recognition,
        message: RaaMessage,
    },
    DisplayUpdate {
        fuzzy_score: f64,
        recognition: Recognition,
        message: RaaMessage,
    },
    RobotAction {
        action: RobotAction,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEvent {
    /// Idempotency key.
    pub event_id: String,
    pub class_id: String,
    pub student_id: String,
    pub sentence_id: String,
    pub timestamp_ms: u64,
    pub body: EventBody,
}

impl AgentEvent {
    pub fn kind(&self) -> EventKind {
        match self.body {
            EventBody::UtteranceScored { .. } => EventKind::UtteranceScored,
            EventBody::RaaResult { .. } => EventKind::RaaResult,
            EventBody::DisplayUpdate { .. } => EventKind::DisplayUpdate,
            EventBody::RobotAction { .. } => EventKind::RobotAction,
        }
    }

    pub fn fuzzy_score(&self) -> Option<f64> {
        match self.body {
            EventBody::UtteranceScored { fuzzy_score }
            | EventBody::RaaResult { fuzzy_score, .. }
            | EventBody::DisplayUpdate { fuzzy_score, .. } => Some(fuzzy_score),
            EventBody::RobotAction { .. } => None,
        }
    }

    /// Id of the event of `kind` caused by this one.
    pub fn chained_id(&self, kind: EventKind) -> String {
        format!("{}/{}", self.event_id, kind.as_str())
    }

    pub fn topic(&self) -> String {
        topic(self.kind(), &self.class_id)
    }

    fn check(&self) -> Result<(), NetError> {
        for (name, v) in [
            ("event_id", &self.event_id),
            ("class_id", &self.class_id),
            ("student_id", &self.student_id),
            ("sentence_id", &self.sentence_id),
        ] {
            if v.is_empty() {
                return Err(NetError::MalformedPayload(format!("{name} is empty")));
            }
        }
        if let Some(s) = self.fuzzy_score() {
            if !(0.0..=1.0).contains(&s) {
                return Err(NetError::MalformedPayload(format!("fuzzy_score {s} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Flat JSON form. Field order is the payload order.
#[derive(Debug, Default, Serialize, Deserialize)]
struct Wire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    student_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentence_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fuzzy_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recognition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp_ms: Option<u64>,
}

pub fn encode_event(e: &AgentEvent) -> Vec<u8> {
    let mut w = Wire {
        event_id: Some(e.event_id.clone()),
        kind: Some(e.kind().as_str().to_owned()),
        class_id: Some(e.class_id.clone()),
        student_id: Some(e.student_id.clone()),
        sentence_id: Some(e.sentence_id.clone()),
        timestamp_ms: Some(e.timestamp_ms),
        fuzzy_score: e.fuzzy_score(),
        ..Wire::default()
    };
    match e.body {
        EventBody::UtteranceScored { .. } => {}
        EventBody::RaaResult {
            recognition,
            message,
            ..
        }
        | EventBody::DisplayUpdate {
            recognition,
            message,
            ..
        } => {
            w.recognition = Some(recognition.as_str().to_owned());
            w.message = Some(message.text().to_owned());
        }
        EventBody::RobotAction { action } => w.action = Some(action.as_str().to_owned()),
    }
    serde_json::to_vec(&w).expect("event serializes")
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, NetError> {
    v.ok_or_else(|| NetError::MalformedPayload(format!("missing {name}")))
}

/// Parses a payload. Unknown fields are ignored, as are known fields that
/// do not belong to the event's kind.
pub fn decode_event(bytes: &[u8]) -> Result<AgentEvent, NetError> {
    let w: Wire =
        serde_json::from_slice(bytes).map_err(|e| NetError::MalformedPayload(e.to_string()))?;
    let kind_name = required(w.kind, "kind")?;
    let kind = EventKind::parse(&kind_name).ok_or(NetError::UnknownKind(kind_name))?;
    let recognition = |r: Option<String>| -> Result<Recognition, NetError> {
        let r = required(r, "recognition")?;
        Recognition::parse(&r).ok_or_else(|| NetError::MalformedPayload(format!("recognition '{r}'")))
    };
    let message = |m: Option<String>| -> Result<RaaMessage, NetError> {
        let m = required(m, "message")?;
        RaaMessage::from_text(&m).ok_or_else(|| NetError::MalformedPayload(format!("message '{m}'")))
    };
    let body = match kind {
        EventKind::UtteranceScored => EventBody::UtteranceScored {
            fuzzy_score: required(w.fuzzy_score, "fuzzy_score")?,
        },
        EventKind::RaaResult => EventBody::RaaResult {
            fuzzy_score: required(w.fuzzy_score, "fuzzy_score")?,
            recognition: recognition(w.recognition)?,
            message: message(w.message)?,
        },
        EventKind::DisplayUpdate => EventBody::DisplayUpdate {
            fuzzy_score: required(w.fuzzy_score, "fuzzy_score")?,
            recognition: recognition(w.recognition)?,
            message: message(w.message)?,
        },
        EventKind::RobotAction => {
            let a = required(w.action, "action")?;
            EventBody::RobotAction {
                action: RobotAction::parse(&a)
                    .ok_or_else(|| NetError::MalformedPayload(format!("action '{a}'")))?,
            }
        }
    };
    let e = AgentEvent {
        event_id: required(w.event_id, "event_id")?,
        class_id: required(w.class_id, "class_id")?,
        student_id: required(w.student_id, "student_id")?,
        sentence_id: required(w.sentence_id, "sentence_id")?,
        timestamp_ms: required(w.timestamp_ms, "timestamp_ms")?,
        body,
    };
    e.check()?;
    Ok(e)
}

pub fn topic(kind: EventKind, class_id: &str) -> String {
    format!("aifml/{class_id}/{}", kind.topic_suffix())
}

/// Inverse of [`topic`].
pub fn parse_topic(t: &str) -> Option<(&str, EventKind)> {
    let rest = t.strip_prefix("aifml/")?;
    let (class_id, suffix) = rest.split_once('/')?;
    let kind = EventKind::ALL.into_iter().find(|k| k.topic_suffix() == suffix)?;
    (!class_id.is_empty()).then_some((class_id, kind))
}

/// MQTT filter matching with `+` (one level) and trailing `#`.
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}

/// A message handed to a subscriber. `token` identifies it for [`Transport::ack`].
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub topic: String,
    pub payload: Vec<u8>,
    pub token: u64,
}

/// The broker operations an endpoint needs, with QoS 1 semantics: a
/// delivery that is not acknowledged before the connection drops is
/// delivered again.
pub trait Transport {
    fn subscribe(&mut self, filter: &str) -> Result<(), NetError>;
    fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<(), NetError>;
    /// Next delivery, or `None` when nothing is ready.
    fn poll(&mut self) -> Result<Option<Delivery>, NetError>;
    fn ack(&mut self, delivery: &Delivery) -> Result<(), NetError>;
}
