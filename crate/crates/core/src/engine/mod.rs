//! Session driver: block schedule, trial execution, the append-only event log
//! and log replay.

mod clock;
mod event;
mod replay;
mod schedule;
mod session;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentDescriptor, AgentError};
use crate::language::LanguageError;

pub use clock::{Clock, LogicalClock, SystemClock};
pub use event::{
    read_log, read_log_lenient, Candidate, EventRecord, EventSink, JsonlSink, LogReadReport, SharedSink,
    VecSink, SCHEMA_VERSION,
};
pub use replay::{group_by_session, replay, RoundTally, SessionState};
pub use schedule::{build_schedule, display_order, sample_distractors, Task, TASKS_PER_ROUND};
pub use session::{Session, SessionOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Exposure,
    Guessing,
    Labelling,
    Communication,
    Testing,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Exposure => "exposure",
            BlockKind::Guessing => "guessing",
            BlockKind::Labelling => "labelling",
            BlockKind::Communication => "communication",
            BlockKind::Testing => "testing",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Experimental condition: who plays with whom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Hh,
    Ll,
    Hl,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Hh => "hh",
            Condition::Ll => "ll",
            Condition::Hl => "hl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hh" | "human-human" => Some(Condition::Hh),
            "ll" | "llm-llm" => Some(Condition::Ll),
            "hl" | "lh" | "human-llm" => Some(Condition::Hl),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the two seats in a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
}

impl Slot {
    pub const BOTH: [Slot; 2] = [Slot::A, Slot::B];

    pub fn id(self) -> &'static str {
        match self {
            Slot::A => "A",
            Slot::B => "B",
        }
    }

    pub fn other(self) -> Slot {
        match self {
            Slot::A => Slot::B,
            Slot::B => Slot::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Slot> {
        match s {
            "A" => Some(Slot::A),
            "B" => Some(Slot::B),
            _ => None,
        }
    }
}

fn default_rounds() -> u32 {
    4
}
fn default_distractors() -> usize {
    3
}
fn default_passes() -> u32 {
    2
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionConfig {
    pub session_id: String,
    pub condition: Condition,
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_distractors")]
    pub distractor_count: usize,
    /// Distractor labels shown in the guessing block.
    #[serde(default = "default_distractors")]
    pub guessing_distractors: usize,
    #[serde(default = "default_passes")]
    pub exposure_passes: u32,
    /// Whether listeners learn the intended target after a trial.
    #[serde(default = "default_true")]
    pub reveal_target: bool,
    /// Hard cap on wall-clock session length, if any.
    #[serde(default)]
    pub max_duration_ms: Option<u64>,
    pub agent_a: AgentDescriptor,
    pub agent_b: AgentDescriptor,
}

impl SessionConfig {
    pub fn new(session_id: impl Into<String>, condition: Condition, seed: u64, a: AgentDescriptor, b: AgentDescriptor) -> Self {
        SessionConfig {
            session_id: session_id.into(),
            condition,
            seed,
            rounds: default_rounds(),
            distractor_count: default_distractors(),
            guessing_distractors: default_distractors(),
            exposure_passes: default_passes(),
            reveal_target: true,
            max_duration_ms: None,
            agent_a: a,
            agent_b: b,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.rounds < 1 {
            return bad("rounds must be at least 1".into());
        }
        if !(1..=14).contains(&self.distractor_count) {
            return bad(format!("distractorCount {} not in 1..=14", self.distractor_count));
        }
        if !(1..=14).contains(&self.guessing_distractors) {
            return bad(format!("guessingDistractors {} not in 1..=14", self.guessing_distractors));
        }
        if self.exposure_passes < 1 {
            return bad("exposurePasses must be at least 1".into());
        }
        if self.session_id.is_empty() {
            return bad("sessionId is empty".into());
        }
        Ok(())
    }

    pub fn descriptor(&self, slot: Slot) -> &AgentDescriptor {
        match slot {
            Slot::A => &self.agent_a,
            Slot::B => &self.agent_b,
        }
    }

    /// Number of tasks the schedule will contain.
    pub fn task_count(&self) -> u32 {
        let train = crate::language::TRAIN_SIZE as u32;
        2 * train * self.exposure_passes
            + train
            + self.rounds * TASKS_PER_ROUND
            + crate::language::Meaning::COUNT as u32
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("distractor pool too small: need {needed}, have {available}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error("agent {slot} failed fatally: {source}")]
    Agent {
        slot: &'static str,
        #[source]
        source: AgentError,
    },
    #[error("session exceeded its {0} ms time cap")]
    TimeCap(u64),
    #[error("log: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log: {0}")]
    MalformedLog(String),
}
