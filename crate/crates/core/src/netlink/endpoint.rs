use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use super::{
    decode_event, encode_event, topic, AgentEvent, Delivery, EventBody, EventKind, NetError,
    RobotAction, SessionStore, Transport,
};
use crate::raa::{RaaSession, Utterance};

/// Where a fault-injected handler stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrashPoint {
    /// Before any side effect.
    BeforePublish,
    /// After the first of several publishes.
    AfterFirstPublish,
    /// After publishing, before the effect is committed.
    BeforeCommit,
    /// After committing, before the delivery is acknowledged.
    BeforeAck,
}

impl CrashPoint {
    pub const ALL: [CrashPoint; 4] = [
        CrashPoint::BeforePublish,
        CrashPoint::AfterFirstPublish,
        CrashPoint::BeforeCommit,
        CrashPoint::BeforeAck,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handled {
    /// First delivery of an event this endpoint cares about.
    Processed,
    /// Already applied earlier; nothing done.
    Duplicate,
    /// Malformed, foreign or irrelevant; logged and dropped.
    Skipped,
}

fn crash(at: Option<CrashPoint>, here: CrashPoint) -> Result<(), NetError> {
    if at == Some(here) {
        Err(NetError::Crashed(here))
    } else {
        Ok(())
    }
}

/// A single-threaded message handler.
pub trait Endpoint {
    /// Topic filters to subscribe to.
    fn filters(&self) -> Vec<String>;

    /// Handles one delivery. `crash_at` stops the handler at that point
    /// with [`NetError::Crashed`]; `BeforeAck` is applied by
    /// [`process_next`].
    fn handle(
        &mut self,
        delivery: &Delivery,
        out: &mut dyn Transport,
        crash_at: Option<CrashPoint>,
    ) -> Result<Handled, NetError>;
}

/// Polls one delivery, handles it and acknowledges it. Returns `None` when
/// nothing was waiting.
pub fn process_next(
    endpoint: &mut dyn Endpoint,
    transport: &mut dyn Transport,
    crash_at: Option<CrashPoint>,
) -> Result<Option<Handled>, NetError> {
    let Some(d) = transport.poll()? else {
        return Ok(None);
    };
    let handled = endpoint.handle(&d, transport, crash_at)?;
    crash(crash_at, CrashPoint::BeforeAck)?;
    transport.ack(&d)?;
    Ok(Some(handled))
}

/// Subscribes `endpoint` and handles deliveries until `stop` is set,
/// sleeping `idle` whenever nothing is waiting. Returns the number of
/// deliveries handled.
pub fn serve(
    endpoint: &mut dyn Endpoint,
    transport: &mut dyn Transport,
    stop: &AtomicBool,
    idle: Duration,
) -> Result<u64, NetError> {
    for f in endpoint.filters() {
        transport.subscribe(&f)?;
    }
    let mut handled = 0;
    while !stop.load(Ordering::SeqCst) {
        match process_next(endpoint, transport, None)? {
            Some(_) => handled += 1,
            None if !idle.is_zero() => std::thread::sleep(idle),
            None => {}
        }
    }
    Ok(handled)
}

fn decode_for(class_id: &str, d: &Delivery, want: EventKind) -> Option<AgentEvent> {
    match decode_event(&d.payload) {
        Ok(e) if e.kind() == want && e.class_id == class_id => Some(e),
        Ok(e) => {
            log::debug!("ignoring {} '{}' on {}", e.kind().as_str(), e.event_id, d.topic);
            None
        }
        Err(err) => {
            log::warn!("dropping payload on {}: {err}", d.topic);
            None
        }
    }
}

/// Scores utterances and publishes the result, display and robot events.
#[derive(Debug)]
pub struct RaaService<S> {
    class_id: String,
    store: S,
}

impl<S: SessionStore> RaaService<S> {
    pub fn new(class_id: impl Into<String>, store: S) -> Self {
        Self {
            class_id: class_id.into(),
            store,
        }
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }

    /// The three events answering `e`, without side effects.
    fn respond(&self, e: &AgentEvent, fuzzy_score: f64) -> Result<[AgentEvent; 3], NetError> {
        let pairc = self.store.session(&e.student_id).map_or(0, |s| s.pairc);
        if !(0.0..=1.0).contains(&fuzzy_score) {
            return Err(crate::raa::RaaError::ScoreOutOfRange(fuzzy_score).into());
        }
        let outcome = self.store.config().decide(pairc, fuzzy_score);
        let make = |kind: EventKind, body: EventBody| AgentEvent {
            event_id: e.chained_id(kind),
            body,
            ..e.clone()
        };
        Ok([
            make(
                EventKind::RaaResult,
                EventBody::RaaResult {
                    fuzzy_score,
                    recognition: outcome.recognition,
                    message: outcome.message,
                },
            ),
            make(
                EventKind::DisplayUpdate,
                EventBody::DisplayUpdate {
                    fuzzy_score,
                    recognition: outcome.recognition,
                    message: outcome.message,
                },
            ),
            make(
                EventKind::RobotAction,
                EventBody::RobotAction {
                    action: RobotAction::for_message(outcome.message),
                },
            ),
        ])
    }
}

impl<S: SessionStore> Endpoint for RaaService<S> {
    fn filters(&self) -> Vec<String> {
        vec![topic(EventKind::UtteranceScored, &self.class_id)]
    }

    fn handle(
        &mut self,
        d: &Delivery,
        out: &mut dyn Transport,
        crash_at: Option<CrashPoint>,
    ) -> Result<Handled, NetError> {
        let Some(e) = decode_for(&self.class_id, d, EventKind::UtteranceScored) else {
            return Ok(Handled::Skipped);
        };
        if self.store.is_processed(&e.event_id) {
            return Ok(Handled::Duplicate);
        }
        let score = e.fuzzy_score().expect("utterance carries a score");
        crash(crash_at, CrashPoint::BeforePublish)?;
        let replies = self.respond(&e, score)?;
        for (i, r) in replies.iter().enumerate() {
            out.publish(&r.topic(), &encode_event(r))?;
            if i == 0 {
                crash(crash_at, CrashPoint::AfterFirstPublish)?;
            }
        }
        crash(crash_at, CrashPoint::BeforeCommit)?;
        self.store.commit(
            &e.event_id,
            Utterance {
                student_id: e.student_id,
                sentence_id: e.sentence_id,
                fuzzy_score: score,
                timestamp_ms: e.timestamp_ms,
            },
        )?;
        Ok(Handled::Processed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceRole {
    /// The learning tool's LCD: logs display updates.
    Display,
    /// The robot: logs actions.
    Robot,
}

impl DeviceRole {
    fn kind(self) -> EventKind {
        match self {
            DeviceRole::Display => EventKind::DisplayUpdate,
            DeviceRole::Robot => EventKind::RobotAction,
        }
    }
}

/// Device simulator. Its observation log doubles as its durable state: the
/// first tab-separated field of each line is the event id, which is all
/// that deduplication needs after a restart.
#[derive(Debug, Clone)]
pub struct DeviceSim {
    role: DeviceRole,
    class_id: String,
    seen: HashSet<String>,
    lines: Vec<String>,
}

impl DeviceSim {
    pub fn new(role: DeviceRole, class_id: impl Into<String>) -> Self {
        Self::from_log(role, class_id, Vec::new())
    }

    /// Resumes from an existing observation log.
    pub fn from_log(role: DeviceRole, class_id: impl Into<String>, lines: Vec<String>) -> Self {
        let seen = lines
            .iter()
            .filter_map(|l| l.split('\t').next())
            .map(str::to_owned)
            .collect();
        Self {
            role,
            class_id: class_id.into(),
            seen,
            lines,
        }
    }

    pub fn role(&self) -> DeviceRole {
        self.role
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn into_lines(self) -> Vec<String> {
        self.lines
    }

    fn line(e: &AgentEvent) -> String {
        let head = format!("{}\t{}\t{}", e.event_id, e.student_id, e.sentence_id);
        match &e.body {
            EventBody::DisplayUpdate {
                fuzzy_score,
                recognition,
                message,
            } => format!("{head}\t{}\t{}\t{fuzzy_score}", recognition.as_str(), message.text()),
            EventBody::RobotAction { action } => format!("{head}\t{}", action.as_str()),
            _ => unreachable!("devices only log their own kind"),
        }
    }
}

impl Endpoint for DeviceSim {
    fn filters(&self) -> Vec<String> {
        vec![topic(self.role.kind(), &self.class_id)]
    }

    fn handle(
        &mut self,
        d: &Delivery,
        _out: &mut dyn Transport,
        crash_at: Option<CrashPoint>,
    ) -> Result<Handled, NetError> {
        let Some(e) = decode_for(&self.class_id, d, self.role.kind()) else {
            return Ok(Handled::Skipped);
        };
        if self.seen.contains(&e.event_id) {
            return Ok(Handled::Duplicate);
        }
        crash(crash_at, CrashPoint::BeforeCommit)?;
        self.lines.push(Self::line(&e));
        self.seen.insert(e.event_id);
        Ok(Handled::Processed)
    }
}

/// Offline reference: the robot actions a session history implies.
pub fn expected_actions(session: &RaaSession) -> Vec<RobotAction> {
    session
        .history
        .iter()
        .map(|(_, o)| RobotAction::for_message(o.message))
        .collect()
}
