//! Ordered session record and its line-delimited text form.
//!
//! Each event occupies one line with four tab-separated fields:
//!
//! ```text
//! <ordinal>\t<actor>\t<kind>\t<payload as compact JSON>
//! ```
//!
//! Ordinals start at 0 and increase by one per line. See
//! `docs/transcript-format.md` for the payload of every kind.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::channel::{Channel, Party};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: bad ordinal {text:?}")]
    BadOrdinal { line: usize, text: String },
    #[error("line {line}: ordinal {found} out of sequence (expected {expected})")]
    OutOfSequence { line: usize, expected: u64, found: u64 },
    #[error("line {line}: unknown actor {text:?}")]
    BadActor { line: usize, text: String },
    #[error("line {line}: {message}")]
    BadPayload { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Auth,
    Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Authenticated,
    AuthAborted,
    MessageDelivered,
    MessageDiscarded,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Authenticated => "authenticated",
            Verdict::AuthAborted => "auth_aborted",
            Verdict::MessageDelivered => "message_delivered",
            Verdict::MessageDiscarded => "message_discarded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureBasis {
    Z,
    X,
    Bell,
}

/// Something said on the public classical channel.
///
/// Outcome strings use `0`/`1` for z and Trent bits, `+`/`-` for x.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Announcement {
    CheckPositions { phase: Phase, positions: Vec<usize> },
    ZOutcomes { positions: Vec<usize>, values: String },
    XOutcomes { positions: Vec<usize>, values: String },
    TrentBits { positions: Vec<usize>, values: String },
    CheckValues { positions: Vec<usize>, values: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    PrepareGhz {
        count: usize,
    },
    /// Key-driven I/H layer; only the hash counters are logged, never key bits.
    KeyEncode {
        owner: Party,
        count: usize,
        counters: Vec<u64>,
    },
    KeyDecode {
        count: usize,
        counters: Vec<u64>,
    },
    Transmit {
        channel: Channel,
        count: usize,
    },
    MessageEncode {
        data: usize,
        check: usize,
    },
    Measure {
        basis: MeasureBasis,
        count: usize,
    },
    Announce(Announcement),
    CompletionNotice {
        received: usize,
    },
    ErrorRate {
        phase: Phase,
        errors: usize,
        checked: usize,
        rate: f64,
    },
    EccDecode {
        corrected: usize,
        ok: bool,
    },
    Verdict {
        verdict: Verdict,
        error_rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PrepareGhz { .. } => "prepare_ghz",
            EventKind::KeyEncode { .. } => "key_encode",
            EventKind::KeyDecode { .. } => "key_decode",
            EventKind::Transmit { .. } => "transmit",
            EventKind::MessageEncode { .. } => "message_encode",
            EventKind::Measure { .. } => "measure",
            EventKind::Announce(_) => "announce",
            EventKind::CompletionNotice { .. } => "completion_notice",
            EventKind::ErrorRate { .. } => "error_rate",
            EventKind::EccDecode { .. } => "ecc_decode",
            EventKind::Verdict { .. } => "verdict",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub ordinal: u64,
    pub actor: Party,
    pub kind: EventKind,
}

impl Event {
    pub fn to_line(&self) -> String {
        let payload = match serde_json::to_value(&self.kind) {
            Ok(Value::Object(mut map)) => map.remove("payload").unwrap_or(Value::Null),
            _ => Value::Null,
        };
        format!("{}\t{}\t{}\t{}", self.ordinal, self.actor, self.kind.name(), payload)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, actor: Party, kind: EventKind) {
        let ordinal = self.events.len() as u64;
        self.events.push(Event { ordinal, actor, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Last verdict recorded, if any.
    pub fn verdict(&self) -> Option<Verdict> {
        self.events.iter().rev().find_map(|e| match e.kind {
            EventKind::Verdict { verdict, .. } => Some(verdict),
            _ => None,
        })
    }

    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    pub fn parse_log(text: &str) -> Result<Self, TranscriptError> {
        let mut transcript = Transcript::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.splitn(4, '\t').collect();
            if fields.len() != 4 {
                return Err(TranscriptError::FieldCount { line, found: fields.len() });
            }
            let ordinal: u64 = fields[0].parse().map_err(|_| TranscriptError::BadOrdinal {
                line,
                text: fields[0].to_string(),
            })?;
            let expected = transcript.events.len() as u64;
            if ordinal != expected {
                return Err(TranscriptError::OutOfSequence { line, expected, found: ordinal });
            }
            let actor: Party = fields[1].parse().map_err(|_| TranscriptError::BadActor {
                line,
                text: fields[1].to_string(),
            })?;
            let payload: Value = serde_json::from_str(fields[3]).map_err(|e| TranscriptError::BadPayload {
                line,
                message: e.to_string(),
            })?;
            let mut map = Map::new();
            map.insert("kind".into(), Value::String(fields[2].to_string()));
            map.insert("payload".into(), payload);
            let kind: EventKind = serde_json::from_value(Value::Object(map)).map_err(|e| TranscriptError::BadPayload {
                line,
                message: e.to_string(),
            })?;
            transcript.events.push(Event { ordinal, actor, kind });
        }
        Ok(transcript)
    }

    /// Check the ordering rules every session must obey:
    /// a delivered message is preceded by successful authentication, and
    /// check positions are announced only after the qubits of that phase
    /// have been transmitted.
    pub fn validate(&self) -> Result<(), String> {
        let mut authenticated = false;
        let mut transmitted_auth = false;
        let mut transmitted_msg = false;
        for e in &self.events {
            match &e.kind {
                EventKind::Transmit { channel, .. } => {
                    if channel.is_distribution() {
                        transmitted_auth = true;
                    } else {
                        transmitted_msg = true;
                    }
                }
                EventKind::Announce(Announcement::CheckPositions { phase, .. }) => {
                    let ok = match phase {
                        Phase::Auth => transmitted_auth,
                        Phase::Message => transmitted_msg,
                    };
                    if !ok {
                        return Err(format!("event {}: check positions announced before transmission", e.ordinal));
                    }
                }
                EventKind::Verdict { verdict, error_rate, .. } => {
                    if !error_rate.is_finite() {
                        return Err(format!("event {}: verdict without an error rate", e.ordinal));
                    }
                    match verdict {
                        Verdict::Authenticated => authenticated = true,
                        Verdict::MessageDelivered if !authenticated => {
                            return Err(format!("event {}: delivery without authentication", e.ordinal));
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
