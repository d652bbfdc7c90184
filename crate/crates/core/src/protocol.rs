//! Participant wire protocol: JSON objects `{type, sessionId, trialIndex, payload}`.
//!
//! Payloads carry stimuli symbolically (`{shape, colour, amount}`); clients
//! render them. Nothing in a server-bound or client-bound message reveals the
//! partner type or condition, and listener tasks never identify the target.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::Role;
use crate::engine::BlockKind;
use crate::language::{Label, Meaning};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServerMessage {
    pub session_id: String,
    pub trial_index: Option<u32>,
    #[serde(flatten)]
    pub body: ServerBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "camelCase")]
pub enum ServerBody {
    Waiting {},
    Start { role: String, version: u32 },
    Instructions { block: BlockKind, text: String },
    Task(TaskPayload),
    Feedback(FeedbackPayload),
    Error { message: String },
    Finished {},
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum TaskPayload {
    Exposure { stimulus: Meaning, label: Label },
    Guessing { stimulus: Meaning, labels: Vec<Label> },
    Labelling { stimulus: Meaning },
    #[serde(rename_all = "camelCase")]
    Speaker { round_id: u32, stimulus: Meaning },
    #[serde(rename_all = "camelCase")]
    Listener { round_id: u32, label: Label, candidates: Vec<Meaning> },
    Testing { stimulus: Meaning },
}

impl TaskPayload {
    /// Whether the participant must answer this task.
    pub fn expects_answer(&self) -> bool {
        !matches!(self, TaskPayload::Exposure { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackPayload {
    pub success: Option<bool>,
    pub role: Role,
    pub label: Option<Label>,
    pub chosen: Option<Meaning>,
    /// The intended target, present only when targets are revealed.
    pub intended: Option<Meaning>,
}

/// A message from a participant. Parsed leniently; validation happens when the
/// answer is matched to the pending task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClientMessage {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub trial_index: Option<u32>,
    #[serde(default)]
    pub payload: Value,
}

impl ClientMessage {
    pub fn answer_label(trial_index: u32, label: &str) -> Self {
        ClientMessage {
            kind: "answer".into(),
            session_id: None,
            trial_index: Some(trial_index),
            payload: serde_json::json!({ "label": label }),
        }
    }

    pub fn answer_choice(trial_index: u32, choice: usize) -> Self {
        ClientMessage {
            kind: "answer".into(),
            session_id: None,
            trial_index: Some(trial_index),
            payload: serde_json::json!({ "choiceIndex": choice }),
        }
    }

    pub fn label(&self) -> Option<&str> {
        self.payload.get("label")?.as_str()
    }

    pub fn choice_index(&self) -> Option<usize> {
        self.payload.get("choiceIndex")?.as_u64().map(|v| v as usize)
    }
}
