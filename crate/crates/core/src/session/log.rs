use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::{create_session, handle_message, SessionState};
use super::wire::Envelope;
use crate::engine::{GameConfig, TrialRecord};
use crate::error::Result;
use crate::stimulus::StimulusSet;

/// Who wrote a log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogOrigin {
    /// A live or driven session; trials are re-derived from the messages.
    #[default]
    Session,
    /// A simulation export holding trial records only.
    Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum EventPayload {
    /// Always the first record.
    Created {
        config: GameConfig,
        datasets: Vec<StimulusSet>,
        origin: LogOrigin,
    },
    /// An applied client frame.
    Message(Envelope),
    /// A completed exchange.
    Trial(TrialRecord),
}

/// One JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub session_id: String,
    /// Position in the log, from 0 without gaps.
    pub sequence: u64,
    pub payload: EventPayload,
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Writes `record` as one line and flushes.
pub fn persist_event<W: Write>(out: &mut W, record: &EventLogRecord) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Numbers and appends records for one session.
#[derive(Debug)]
pub struct EventLog<W> {
    out: W,
    session_id: String,
    next_sequence: u64,
}

impl<W: Write> EventLog<W> {
    pub fn new(out: W, session_id: impl Into<String>) -> Self {
        Self {
            out,
            session_id: session_id.into(),
            next_sequence: 0,
        }
    }

    /// Continues a log that already holds `next_sequence` records.
    pub fn resume(out: W, session_id: impl Into<String>, next_sequence: u64) -> Self {
        Self {
            out,
            session_id: session_id.into(),
            next_sequence,
        }
    }

    pub fn next_sequence(&self) -> u64 {
        self.next_sequence
    }

    pub fn append(&mut self, payload: EventPayload, timestamp: u64) -> Result<EventLogRecord> {
        let record = EventLogRecord {
            timestamp,
            session_id: self.session_id.clone(),
            sequence: self.next_sequence,
            payload,
        };
        persist_event(&mut self.out, &record)?;
        self.next_sequence += 1;
        Ok(record)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Log records for simulated trials.
pub fn engine_log(
    session_id: &str,
    config: &GameConfig,
    datasets: &[StimulusSet],
    trials: &[TrialRecord],
    timestamp: u64,
) -> Vec<EventLogRecord> {
    let created = EventPayload::Created {
        config: config.clone(),
        datasets: datasets.to_vec(),
        origin: LogOrigin::Engine,
    };
    std::iter::once(created)
        .chain(trials.iter().cloned().map(EventPayload::Trial))
        .enumerate()
        .map(|(i, payload)| EventLogRecord {
            timestamp,
            session_id: session_id.to_string(),
            sequence: i as u64,
            payload,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,

    #[error("reading line {line}: {message}")]
    Io { line: usize, message: String },

    /// A line that does not parse; the usual sign of an interrupted write.
    #[error("line {line} is truncated or malformed ({message}); {} complete trials before it", complete_trials.len())]
    Truncated {
        line: usize,
        message: String,
        complete_trials: Vec<TrialRecord>,
    },

    #[error("session {session_id}: missing sequence numbers {missing_from}..={missing_to}")]
    SequenceGap {
        session_id: String,
        missing_from: u64,
        missing_to: u64,
    },

    #[error("line {line}: sequence {found} repeats or goes backwards (expected {expected})")]
    OutOfOrder {
        line: usize,
        expected: u64,
        found: u64,
    },

    #[error("line {line}: record belongs to session {found:?}, log is for {expected:?}")]
    SessionMismatch {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("first record must create the session")]
    MissingHeader,

    #[error("record {sequence}: {message}")]
    Invalid { sequence: u64, message: String },

    #[error("record {sequence}: logged message was refused on replay: {message}")]
    Rejected { sequence: u64, message: String },

    #[error("record {sequence}: logged trial differs from the replayed one")]
    TrialMismatch { sequence: u64 },
}

/// The result of reading a log from the start.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub origin: LogOrigin,
    /// Reconstructed state; for engine logs, the session as created.
    pub state: SessionState,
    /// Trial records, each checked against the replayed protocol.
    pub trials: Vec<TrialRecord>,
    pub records: usize,
    /// The session reached its end, or the log is an engine export.
    pub complete: bool,
}

/// Replays a JSONL event log through the state machine.
pub fn replay_log<R: BufRead>(reader: R) -> Result<Replay, ReplayError> {
    let mut replay: Option<Replay> = None;
    let mut derived: VecDeque<TrialRecord> = VecDeque::new();
    let mut expected = 0u64;
    let mut session_id = String::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| ReplayError::Io {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventLogRecord =
            serde_json::from_str(&line).map_err(|e| ReplayError::Truncated {
                line: line_no,
                message: e.to_string(),
                complete_trials: replay
                    .as_ref()
                    .map(|r| r.trials.clone())
                    .unwrap_or_default(),
            })?;
        if replay.is_none() {
            session_id = record.session_id.clone();
        } else if record.session_id != session_id {
            return Err(ReplayError::SessionMismatch {
                line: line_no,
                expected: session_id,
                found: record.session_id,
            });
        }
        if record.sequence > expected {
            return Err(ReplayError::SequenceGap {
                session_id,
                missing_from: expected,
                missing_to: record.sequence - 1,
            });
        }
        if record.sequence < expected {
            return Err(ReplayError::OutOfOrder {
                line: line_no,
                expected,
                found: record.sequence,
            });
        }
        expected += 1;
        let sequence = record.sequence;

        let Some(r) = replay.as_mut() else {
            let EventPayload::Created {
                config,
                datasets,
                origin,
            } = record.payload
            else {
                return Err(ReplayError::MissingHeader);
            };
            let state = create_session(&session_id, config, datasets).map_err(|e| {
                ReplayError::Invalid {
                    sequence,
                    message: e.to_string(),
                }
            })?;
            replay = Some(Replay {
                origin,
                state,
                trials: Vec::new(),
                records: 1,
                complete: origin == LogOrigin::Engine,
            });
            continue;
        };
        r.records += 1;
        match (record.payload, r.origin) {
            (EventPayload::Created { .. }, _) => {
                return Err(ReplayError::Invalid {
                    sequence,
                    message: "session created twice".into(),
                });
            }
            (EventPayload::Message(env), LogOrigin::Session) => {
                let t = handle_message(&r.state, &env);
                if let Some(message) = t.rejected {
                    return Err(ReplayError::Rejected { sequence, message });
                }
                r.state = t.state;
                derived.extend(t.events.into_iter().filter_map(|e| match e {
                    EventPayload::Trial(trial) => Some(trial),
                    _ => None,
                }));
                r.complete = r.state.is_complete();
            }
            (EventPayload::Message(_), LogOrigin::Engine) => {
                return Err(ReplayError::Invalid {
                    sequence,
                    message: "engine logs carry no messages".into(),
                });
            }
            (EventPayload::Trial(trial), LogOrigin::Session) => {
                if derived.pop_front().as_ref() != Some(&trial) {
                    return Err(ReplayError::TrialMismatch { sequence });
                }
                r.trials.push(trial);
            }
            (EventPayload::Trial(trial), LogOrigin::Engine) => {
                if !r.state.config.datasets.contains(&trial.dataset_id) {
                    return Err(ReplayError::Invalid {
                        sequence,
                        message: format!("unknown dataset {:?}", trial.dataset_id),
                    });
                }
                r.trials.push(trial);
            }
        }
    }
    let mut replay = replay.ok_or(ReplayError::Empty)?;
    if !derived.is_empty() {
        // the last exchange finished but its trial record never made it out
        replay.complete = false;
    }
    Ok(replay)
}

/// Reads and replays the log at `path`.
pub fn replay_file(path: &std::path::Path) -> Result<Replay, ReplayError> {
    let file = std::fs::File::open(path).map_err(|e| ReplayError::Io {
        line: 0,
        message: e.to_string(),
    })?;
    replay_log(std::io::BufReader::new(file))
}
