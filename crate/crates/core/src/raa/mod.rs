//! Robotic assistant agent (RAA) scoring.
//!
//! Each utterance arrives with a fuzzy score in `[0, 1]`. Scores strictly
//! above the threshold are correctly recognized and reset the partially
//! recognized count (PAIRC); anything else bumps PAIRC, and the agent answers
//! "Try Again." until PAIRC reaches 3, then "Cheer Up.".

mod log;
mod stats;

pub use self::log::{read_log, replay, sessions_from_log, write_log, LogRow, Mismatch};
pub use stats::{session_stats, team_report, SessionStats, TeamReport, TeamStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONGRATULATIONS: &str = "Congratulations! You are great.";
pub const TRY_AGAIN: &str = "Try Again.";
pub const CHEER_UP: &str = "Cheer Up.";

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// PAIRC value at which the agent switches from "Try Again." to "Cheer Up.".
pub const CHEER_UP_AT: u32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RaaError {
    #[error("fuzzy score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("utterance from '{got}' sent to the session of '{expected}'")]
    StudentMismatch { expected: String, got: String },
    #[error("session has no utterances")]
    EmptySession,
    #[error("session log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recognition {
    CorrectlyRecognized,
    PartiallyRecognized,
}

impl Recognition {
    pub fn as_str(self) -> &'static str {
        match self {
            Recognition::CorrectlyRecognized => "correctly_recognized",
            Recognition::PartiallyRecognized => "partially_recognized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "correctly_recognized" => Some(Recognition::CorrectlyRecognized),
            "partially_recognized" => Some(Recognition::PartiallyRecognized),
            _ => None,
        }
    }
}

/// What the agent says. The wire and log form is the exact sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RaaMessage {
    Congratulations,
    TryAgain,
    CheerUp,
}

impl RaaMessage {
    pub fn text(self) -> &'static str {
        match self {
            RaaMessage::Congratulations => CONGRATULATIONS,
            RaaMessage::TryAgain => TRY_AGAIN,
            RaaMessage::CheerUp => CHEER_UP,
        }
    }

    pub fn from_text(s: &str) -> Option<Self> {
        match s {
            CONGRATULATIONS => Some(RaaMessage::Congratulations),
            TRY_AGAIN => Some(RaaMessage::TryAgain),
            CHEER_UP => Some(RaaMessage::CheerUp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub student_id: String,
    pub sentence_id: String,
    pub fuzzy_score: f64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaaOutcome {
    pub recognition: Recognition,
    pub message: RaaMessage,
    pub pairc_after: u32,
}

/// Whether PAIRC is bumped before or after it is compared with
/// [`CHEER_UP_AT`] on a partial recognition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaircOrder {
    /// The third consecutive partial attempt already hears "Cheer Up.".
    #[default]
    IncrementThenCompare,
    /// The fourth consecutive partial attempt is the first "Cheer Up.".
    CompareThenIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaaConfig {
    /// Scores strictly greater than this are correctly recognized.
    pub threshold: f64,
    pub pairc_order: PaircOrder,
}

impl Default for RaaConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            pairc_order: PaircOrder::default(),
        }
    }
}

impl RaaConfig {
    /// Pure transition: outcome for `score` given the PAIRC before it.
    pub fn decide(&self, pairc: u32, score: f64) -> RaaOutcome {
        if score > self.threshold {
            return RaaOutcome {
                recognition: Recognition::CorrectlyRecognized,
                message: RaaMessage::Congratulations,
                pairc_after: 0,
            };
        }
        let after = pairc.saturating_add(1);
        let compared = match self.pairc_order {
            PaircOrder::IncrementThenCompare => after,
            PaircOrder::CompareThenIncrement => pairc,
        };
        RaaOutcome {
            recognition: Recognition::PartiallyRecognized,
            message: if compared < CHEER_UP_AT {
                RaaMessage::TryAgain
            } else {
                RaaMessage::CheerUp
            },
            pairc_after: after,
        }
    }
}

/// One student's running state.
#[derive(Debug, Clone, PartialEq)]
pub struct RaaSession {
    pub student_id: String,
    pub pairc: u32,
    pub history: Vec<(Utterance, RaaOutcome)>,
    pub accumulated_score: f64,
    pub correct_count: u32,
    pub partial_count: u32,
}

impl RaaSession {
    pub fn new(student_id: impl Into<String>) -> Self {
        Self {
            student_id: student_id.into(),
            pairc: 0,
            history: Vec::new(),
            accumulated_score: 0.0,
            correct_count: 0,
            partial_count: 0,
        }
    }

    /// Scores `utt` and returns the outcome with the advanced session,
    /// leaving `self` untouched.
    pub fn evaluate(&self, config: &RaaConfig, utt: Utterance) -> Result<(RaaOutcome, RaaSession), RaaError> {
        let mut next = self.clone();
        let outcome = next.step(config, utt)?;
        Ok((outcome, next))
    }

    /// In-place form of [`RaaSession::evaluate`]. On error the session is
    /// unchanged.
    pub fn step(&mut self, config: &RaaConfig, utt: Utterance) -> Result<RaaOutcome, RaaError> {
        if utt.student_id != self.student_id {
            return Err(RaaError::StudentMismatch {
                expected: self.student_id.clone(),
                got: utt.student_id,
            });
        }
        if !(0.0..=1.0).contains(&utt.fuzzy_score) {
            return Err(RaaError::ScoreOutOfRange(utt.fuzzy_score));
        }
        let outcome = config.decide(self.pairc, utt.fuzzy_score);
        self.pairc = outcome.pairc_after;
        match outcome.recognition {
            Recognition::CorrectlyRecognized => self.correct_count += 1,
            Recognition::PartiallyRecognized => self.partial_count += 1,
        }
        self.accumulated_score += utt.fuzzy_score;
        self.history.push((utt, outcome));
        Ok(outcome)
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}
