//! The agent contract and its implementations: LLM-backed in-context
//! learners, scripted oracles, and a proxy for human participants.

pub mod client;
mod descriptor;
mod human;
mod llm;
pub mod mock;
mod oracle;
pub mod prompt;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::BlockKind;
use crate::language::{Label, Meaning, Vocabulary};

pub use client::{CompletionClient, HttpClient, HttpClientConfig, ScoreNorm, TokenBucket};
pub use descriptor::{build_agent, AgentDescriptor, AgentEnv};
pub use human::{HumanProxy, ParticipantChannel};
pub use llm::LlmAgent;
pub use mock::{HeuristicClient, ScriptStep, ScriptedClient};
pub use oracle::{CharTable, CompositionalBot, MemorizerBot, NoisyBot};
pub use prompt::{PromptBundle, PromptMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent timed out after {0:?}")]
    Timeout(Duration),
    #[error("agent unavailable: {0}")]
    Unavailable(String),
    #[error("produced label is empty after sanitization")]
    EmptyLabel,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("session aborted: {0}")]
    Aborted(String),
}

impl AgentError {
    /// Fatal errors end the session; the rest invalidate a single trial.
    pub fn is_fatal(&self) -> bool {
        matches!(self, AgentError::Capability(_) | AgentError::Aborted(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Speaker,
    Listener,
}

/// Why a label is being produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Labelling,
    Communication,
    Testing,
}

impl LabelMode {
    /// Whether a produced label replaces the agent's vocabulary entry.
    pub fn updates_vocabulary(self) -> bool {
        matches!(self, LabelMode::Labelling | LabelMode::Communication)
    }
}

/// Where in the session a call happens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialCtx {
    pub session_id: String,
    pub block: BlockKind,
    pub round_id: Option<u32>,
    pub trial_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Produced {
    pub label: Label,
    pub raw: String,
}

impl Produced {
    pub fn clean(label: Label) -> Self {
        Produced { raw: label.as_str().to_string(), label }
    }

    pub fn from_raw(raw: &str) -> Result<Self, AgentError> {
        let label = Label::sanitize(raw).ok_or(AgentError::EmptyLabel)?;
        Ok(Produced { label, raw: raw.to_string() })
    }
}

/// Outcome of a communication trial as seen by one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub role: Role,
    pub target: Meaning,
    pub label: Option<Label>,
    pub chosen: Option<Meaning>,
    pub success: Option<bool>,
    pub reveal_target: bool,
}

/// Mutable in-context memory: the current vocabulary with success flags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub vocabulary: Vocabulary,
}

impl AgentMemory {
    pub fn adopt(&mut self, meaning: &Meaning, label: &Label, at: u64) {
        if let Err(e) = self.vocabulary.replace_label(meaning, label.clone(), at) {
            log::debug!("label not adopted: {e}");
        }
    }

    pub fn record_outcome(&mut self, meaning: &Meaning, success: Option<bool>) {
        let _ = self.vocabulary.set_success(meaning, success == Some(true));
    }
}

/// A session participant. Calls for one agent are never concurrent.
pub trait Agent: Send {
    /// Receives the initial language before the exposure block.
    fn learn(&mut self, _language: &Vocabulary) {}

    fn expose(&mut self, ctx: &TrialCtx, meaning: &Meaning, label: &Label) -> Result<(), AgentError>;

    /// Picks the label of `meaning` among `candidates`.
    fn guess_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, candidates: &[Label]) -> Result<usize, AgentError>;

    fn produce_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, mode: LabelMode) -> Result<Produced, AgentError>;

    /// Picks the stimulus the partner's `label` refers to.
    fn choose_meaning(&mut self, ctx: &TrialCtx, label: &Label, candidates: &[Meaning]) -> Result<usize, AgentError>;

    /// Commits a produced label to memory.
    fn adopt_label(&mut self, meaning: &Meaning, label: &Label, at: u64);

    fn feedback(&mut self, ctx: &TrialCtx, feedback: &Feedback);

    /// In-context memory, for agents that have one.
    fn memory(&self) -> Option<&AgentMemory>;

    /// Restores memory when resuming a session from its log.
    fn restore(&mut self, _memory: AgentMemory) {}

    /// Called once when the session finishes or aborts.
    fn finish(&mut self, _ctx: &TrialCtx, _reason: Option<&str>) {}
}
