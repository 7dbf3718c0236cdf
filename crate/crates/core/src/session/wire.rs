//! Frames exchanged between the server and participant clients.
//!
//! Every frame is one JSON document:
//!
//! ```json
//! {"version":1,"session_id":"s1","sequence":3,"sender":"alice","type":"propose_name","body":{"label":"C"}}
//! ```
//!
//! `sequence` counts up from 0 per sender. The server's own frames carry
//! `sender: "server"` and a single per-session counter.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stimulus::StimulusSet;

pub const PROTOCOL_VERSION: u32 = 1;
pub const SERVER_SENDER: &str = "server";
/// Names available to participants, index 0 first.
pub const LABELS: [&str; 5] = ["A", "B", "C", "D", "E"];

pub fn label_index(label: &str) -> Result<usize> {
    LABELS
        .iter()
        .position(|l| *l == label)
        .ok_or_else(|| invalid(format!("unknown label {label:?}; expected one of A-E")))
}

pub fn index_label(index: usize) -> Result<&'static str> {
    LABELS
        .get(index)
        .copied()
        .ok_or_else(|| invalid(format!("no label for index {index}")))
}

fn default_version() -> u32 {
    PROTOCOL_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(default = "default_version")]
    pub version: u32,
    pub session_id: String,
    pub sequence: u64,
    pub sender: String,
    #[serde(flatten)]
    pub message: WireMessage,
}

impl Envelope {
    pub fn new(
        session_id: impl Into<String>,
        sequence: u64,
        sender: impl Into<String>,
        message: WireMessage,
    ) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            session_id: session_id.into(),
            sequence,
            sender: sender.into(),
            message,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Speaker,
    Listener,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum WireMessage {
    /// Client: enter a session.
    Join { participant: String },
    /// Server: the next dataset to categorize, with image paths per stimulus.
    StimulusSet {
        manifest: StimulusSet,
        images: Vec<String>,
    },
    /// Client: the label of every stimulus of the current dataset, by
    /// stimulus index. `signs` defaults to the labels.
    SubmitInitialCategorization {
        dataset_id: String,
        labels: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signs: Option<Vec<String>>,
    },
    /// Server: the stimulus of the next exchange and the recipient's role.
    ShowStimulus {
        dataset_id: String,
        round: usize,
        index: usize,
        role: Role,
    },
    /// Speaker: the name for the shown stimulus. Forwarded to the listener.
    ProposeName { label: String },
    /// Listener: accept or reject. Forwarded to the speaker.
    Decision { accept: bool },
    /// Client: move a stimulus to another category.
    EditCategorization { stimulus: usize, label: String },
    /// Server: the listener changed the stimulus it has just decided on.
    EditWarning { stimulus: usize },
    /// Listener: finish the exchange.
    TurnAdvance {},
    /// Server: all datasets are done.
    SessionComplete {},
    /// Server: the frame with this sequence number was applied.
    Ack { sequence: u64 },
    /// Server: the frame was rejected and the session is unchanged.
    ProtocolError { sequence: u64, message: String },
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Join { .. } => "join",
            WireMessage::StimulusSet { .. } => "stimulus_set",
            WireMessage::SubmitInitialCategorization { .. } => "submit_initial_categorization",
            WireMessage::ShowStimulus { .. } => "show_stimulus",
            WireMessage::ProposeName { .. } => "propose_name",
            WireMessage::Decision { .. } => "decision",
            WireMessage::EditCategorization { .. } => "edit_categorization",
            WireMessage::EditWarning { .. } => "edit_warning",
            WireMessage::TurnAdvance {} => "turn_advance",
            WireMessage::SessionComplete {} => "session_complete",
            WireMessage::Ack { .. } => "ack",
            WireMessage::ProtocolError { .. } => "protocol_error",
        }
    }
}
