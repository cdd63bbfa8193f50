use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::raa::{LogRow, RaaConfig, RaaOutcome, RaaSession, Utterance};

/// Durable RAA state: sessions plus the set of event ids already applied.
pub trait SessionStore {
    fn config(&self) -> &RaaConfig;
    fn session(&self, student_id: &str) -> Option<&RaaSession>;
    fn is_processed(&self, event_id: &str) -> bool;
    /// Applies `utt` to its student's session and records `event_id`.
    /// Once this returns the effect must survive a restart.
    fn commit(&mut self, event_id: &str, utt: Utterance) -> Result<RaaOutcome, NetError>;
    /// All sessions, ordered by student id.
    fn sessions(&self) -> Vec<&RaaSession>;
}

#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    config: RaaConfig,
    sessions: BTreeMap<String, RaaSession>,
    processed: HashSet<String>,
}

impl MemoryStore {
    pub fn new(config: RaaConfig) -> Self {
        Self {
            config,
            sessions: BTreeMap::new(),
            processed: HashSet::new(),
        }
    }
}

impl SessionStore for MemoryStore {
    fn config(&self) -> &RaaConfig {
        &self.config
    }

    fn session(&self, student_id: &str) -> Option<&RaaSession> {
        self.sessions.get(student_id)
    }

    fn is_processed(&self, event_id: &str) -> bool {
        self.processed.contains(event_id)
    }

    fn commit(&mut self, event_id: &str, utt: Utterance) -> Result<RaaOutcome, NetError> {
        if self.processed.contains(event_id) {
            return Err(NetError::Store(format!("event '{event_id}' committed twice")));
        }
        let session = self
            .sessions
            .entry(utt.student_id.clone())
            .or_insert_with(|| RaaSession::new(utt.student_id.clone()));
        let outcome = session.step(&self.config, utt)?;
        self.processed.insert(event_id.to_owned());
        Ok(outcome)
    }

    fn sessions(&self) -> Vec<&RaaSession> {
        self.sessions.values().collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Committed {
    event_id: String,
    student_id: String,
    sentence_id: String,
    fuzzy_score: f64,
    timestamp_ms: u64,
}

/// Append-only JSON-lines journal of committed utterances. Opening replays
/// the journal to rebuild every session.
#[derive(Debug)]
pub struct FileStore {
    mem: MemoryStore,
    file: File,
    path: PathBuf,
}

impl FileStore {
    pub fn open(path: impl AsRef<Path>, config: RaaConfig) -> Result<Self, NetError> {
        let path = path.as_ref().to_path_buf();
        let mut mem = MemoryStore::new(config);
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let c: Committed = serde_json::from_str(&line).map_err(|e| {
                    NetError::Store(format!("{}:{}: {e}", path.display(), i + 1))
                })?;
                mem.commit(
                    &c.event_id,
                    Utterance {
                        student_id: c.student_id,
                        sentence_id: c.sentence_id,
                        fuzzy_score: c.fuzzy_score,
                        timestamp_ms: c.timestamp_ms,
                    },
                )?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { mem, file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl SessionStore for FileStore {
    fn config(&self) -> &RaaConfig {
        self.mem.config()
    }

    fn session(&self, student_id: &str) -> Option<&RaaSession> {
        self.mem.session(student_id)
    }

    fn is_processed(&self, event_id: &str) -> bool {
        self.mem.is_processed(event_id)
    }

    fn commit(&mut self, event_id: &str, utt: Utterance) -> Result<RaaOutcome, NetError> {
        let record = Committed {
            event_id: event_id.to_owned(),
            student_id: utt.student_id.clone(),
            sentence_id: utt.sentence_id.clone(),
            fuzzy_score: utt.fuzzy_score,
            timestamp_ms: utt.timestamp_ms,
        };
        let outcome = self.mem.commit(event_id, utt)?;
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(outcome)
    }

    fn sessions(&self) -> Vec<&RaaSession> {
        self.mem.sessions()
    }
}

/// Student to team assignment; unlisted students fall in the default team.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    pub default_team: String,
    pub teams: BTreeMap<String, String>,
}

impl Roster {
    pub fn single(team: impl Into<String>) -> Self {
        Self {
            default_team: team.into(),
            teams: BTreeMap::new(),
        }
    }

    pub fn team_of(&self, student_id: &str) -> &str {
        self.teams.get(student_id).unwrap_or(&self.default_team)
    }
}

/// Session log rows ordered by student id, each student's history in
/// order.
pub fn session_rows(store: &dyn SessionStore, roster: &Roster) -> Vec<LogRow> {
    store
        .sessions()
        .into_iter()
        .flat_map(|s| {
            let team = roster.team_of(&s.student_id);
            s.history.iter().map(move |(u, o)| LogRow::new(team, u, o))
        })
        .collect()
}
