use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{RaaConfig, RaaError, RaaMessage, RaaOutcome, RaaSession, Recognition, Utterance};

/// One row of the session log CSV. Column order is the wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub student_id: String,
    pub team_id: String,
    pub sentence_id: String,
    pub fuzzy_score: f64,
    pub recognition: Recognition,
    pub message: RaaMessage,
    pub pairc_after: u32,
    pub timestamp_ms: u64,
}

impl LogRow {
    pub fn new(team_id: &str, utt: &Utterance, outcome: &RaaOutcome) -> Self {
        Self {
            student_id: utt.student_id.clone(),
            team_id: team_id.to_owned(),
            sentence_id: utt.sentence_id.clone(),
            fuzzy_score: utt.fuzzy_score,
            recognition: outcome.recognition,
            message: outcome.message,
            pairc_after: outcome.pairc_after,
            timestamp_ms: utt.timestamp_ms,
        }
    }

    pub fn utterance(&self) -> Utterance {
        Utterance {
            student_id: self.student_id.clone(),
            sentence_id: self.sentence_id.clone(),
            fuzzy_score: self.fuzzy_score,
            timestamp_ms: self.timestamp_ms,
        }
    }

    pub fn outcome(&self) -> RaaOutcome {
        RaaOutcome {
            recognition: self.recognition,
            message: self.message,
            pairc_after: self.pairc_after,
        }
    }
}

impl Serialize for RaaMessage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.text())
    }
}

impl<'de> Deserialize<'de> for RaaMessage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        RaaMessage::from_text(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown RAA message {s:?}")))
    }
}

const HEADER: [&str; 8] = [
    "student_id",
    "team_id",
    "sentence_id",
    "fuzzy_score",
    "recognition",
    "message",
    "pairc_after",
    "timestamp_ms",
];

pub fn write_log<W: Write>(rows: &[LogRow], out: W) -> Result<(), RaaError> {
    let mut w = csv::Writer::from_writer(out);
    // An empty log still carries its header.
    if rows.is_empty() {
        w.write_record(HEADER).map_err(log_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(log_err)?;
    }
    w.flush().map_err(|e| RaaError::Log(e.to_string()))
}

fn log_err(e: csv::Error) -> RaaError {
    RaaError::Log(e.to_string())
}

pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRow>, RaaError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(log_err)?;
    if header.iter().ne(HEADER) {
        return Err(RaaError::Log(format!(
            "expected header {}, found {}",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = r
        .deserialize()
        .collect::<Result<Vec<LogRow>, _>>()
        .map_err(log_err)?;
    if let Some(bad) = rows.iter().find(|r| !(0.0..=1.0).contains(&r.fuzzy_score)) {
        return Err(RaaError::ScoreOutOfRange(bad.fuzzy_score));
    }
    Ok(rows)
}

/// Rebuilds sessions from recorded outcomes, grouped by team. Teams and
/// students come out sorted by id; each history keeps row order.
pub fn sessions_from_log(rows: &[LogRow]) -> Result<Vec<(String, Vec<RaaSession>)>, RaaError> {
    let mut team_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut teams: BTreeMap<&str, BTreeMap<&str, RaaSession>> = BTreeMap::new();
    for row in rows {
        let team = *team_of.entry(&row.student_id).or_insert(&row.team_id);
        if team != row.team_id {
            return Err(RaaError::Log(format!(
                "student '{}' appears in teams '{}' and '{}'",
                row.student_id, team, row.team_id
            )));
        }
        let session = teams
            .entry(team)
            .or_default()
            .entry(&row.student_id)
            .or_insert_with(|| RaaSession::new(row.student_id.clone()));
        session.pairc = row.pairc_after;
        match row.recognition {
            Recognition::CorrectlyRecognized => session.correct_count += 1,
            Recognition::PartiallyRecognized => session.partial_count += 1,
        }
        session.accumulated_score += row.fuzzy_score;
        session.history.push((row.utterance(), row.outcome()));
    }
    Ok(teams
        .into_iter()
        .map(|(t, students)| (t.to_owned(), students.into_values().collect()))
        .collect())
}

/// A log row whose recorded outcome differs from re-evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub row: usize,
    pub recorded: RaaOutcome,
    pub replayed: RaaOutcome,
}

/// Re-runs every utterance through the state machine, per student in row
/// order, and reports rows whose recorded outcome disagrees.
pub fn replay(rows: &[LogRow], config: &RaaConfig) -> Result<Vec<Mismatch>, RaaError> {
    let mut sessions: BTreeMap<&str, RaaSession> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let session = sessions
            .entry(&row.student_id)
            .or_insert_with(|| RaaSession::new(row.student_id.clone()));
        let replayed = session.step(config, row.utterance())?;
        if replayed != row.outcome() {
            out.push(Mismatch {
                row: i,
                recorded: row.outcome(),
                replayed,
            });
        }
    }
    Ok(out)
}
