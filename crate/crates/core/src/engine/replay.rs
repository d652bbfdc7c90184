use std::collections::BTreeMap;

use serde::Serialize;

use super::{BlockKind, Candidate, Condition, EngineError, EventRecord, Slot};
use crate::agents::AgentMemory;
use crate::language::{Label, Meaning, Vocabulary};

/// Success tally for one communication round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundTally {
    pub trials: u32,
    /// Trials with a defined outcome.
    pub valid: u32,
    pub successes: u32,
}

impl RoundTally {
    pub fn success_rate(&self) -> Option<f64> {
        (self.valid > 0).then(|| f64::from(self.successes) / f64::from(self.valid))
    }
}

/// Everything recoverable from a session's event log. The same fold runs live
/// (record by record) and offline, so both views agree.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionState {
    pub session_id: String,
    pub condition: Option<Condition>,
    pub task_count: u32,
    /// Index of the first trial not yet logged.
    pub next_trial: u32,
    pub records: usize,
    /// Language shown during exposure, rebuilt from exposure records.
    pub initial_language: Vocabulary,
    /// Per-slot memory, mirroring what in-context agents hold.
    pub memories: [AgentMemory; 2],
    /// Guessing (correct, valid) per slot.
    pub guessing: [(u32, u32); 2],
    pub labelling: [Vec<(Meaning, Label)>; 2],
    pub rounds: BTreeMap<u32, RoundTally>,
    /// Speaker productions per round and slot.
    pub productions: BTreeMap<u32, [Vec<(Meaning, Label)>; 2]>,
    pub testing: [Vec<(Meaning, Label)>; 2],
    /// Trials whose record carries an error.
    pub errors: u32,
    /// Set when the log stops before the last scheduled trial.
    pub incomplete: bool,
}

fn slot_of(id: Option<&str>) -> Result<Slot, EngineError> {
    id.and_then(Slot::parse).ok_or_else(|| EngineError::MalformedLog(format!("unknown agent id {id:?}")))
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, condition: Condition, task_count: u32) -> Self {
        SessionState {
            session_id: session_id.into(),
            condition: Some(condition),
            task_count,
            incomplete: true,
            ..Default::default()
        }
    }

    /// Folds one record into the state.
    pub fn apply(&mut self, rec: &EventRecord) -> Result<(), EngineError> {
        if self.records == 0 && self.session_id.is_empty() {
            self.session_id = rec.session_id.clone();
            self.condition = Some(rec.condition);
        } else if rec.session_id != self.session_id {
            return Err(EngineError::MalformedLog(format!(
                "record for session {} in log of {}",
                rec.session_id, self.session_id
            )));
        }
        self.task_count = rec.task_count;
        if rec.trial_index + 1 < self.next_trial {
            return Err(EngineError::MalformedLog(format!("trial {} out of order", rec.trial_index)));
        }
        self.records += 1;
        if rec.error.is_some() {
            self.errors += 1;
        }
        let at = u64::from(rec.trial_index);
        match rec.block_kind {
            BlockKind::Exposure => {
                let slot = slot_of(rec.agent_id.as_deref())?;
                if let Some(Candidate::Label(l)) = rec.candidates.first() {
                    if self.initial_language.get(&rec.target).is_none() {
                        self.initial_language.upsert(rec.target, l.clone(), 0);
                    }
                    self.memories[slot.index()].vocabulary.upsert(rec.target, l.clone(), at);
                }
            }
            BlockKind::Guessing => {
                let slot = slot_of(rec.agent_id.as_deref())?;
                if let Some(s) = rec.success {
                    let g = &mut self.guessing[slot.index()];
                    g.1 += 1;
                    g.0 += u32::from(s);
                }
            }
            BlockKind::Labelling => {
                let slot = slot_of(rec.agent_id.as_deref())?;
                if let Some(l) = &rec.produced_label {
                    self.memories[slot.index()].adopt(&rec.target, l, at);
                    self.labelling[slot.index()].push((rec.target, l.clone()));
                }
            }
            BlockKind::Communication => {
                let speaker = slot_of(rec.speaker_id.as_deref())?;
                let round = rec.round_id.ok_or_else(|| EngineError::MalformedLog("communication without roundId".into()))?;
                let tally = self.rounds.entry(round).or_default();
                tally.trials += 1;
                if let Some(s) = rec.success {
                    tally.valid += 1;
                    tally.successes += u32::from(s);
                }
                if let Some(l) = &rec.produced_label {
                    self.memories[speaker.index()].adopt(&rec.target, l, at);
                    self.productions.entry(round).or_default()[speaker.index()].push((rec.target, l.clone()));
                }
                for m in &mut self.memories {
                    m.record_outcome(&rec.target, rec.success);
                }
            }
            BlockKind::Testing => {
                let slot = slot_of(rec.agent_id.as_deref())?;
                if let Some(l) = &rec.produced_label {
                    self.testing[slot.index()].push((rec.target, l.clone()));
                }
            }
        }
        self.next_trial = self.next_trial.max(rec.trial_index + 1);
        self.incomplete = self.next_trial < self.task_count;
        Ok(())
    }

    pub fn guessing_accuracy(&self, slot: Slot) -> Option<f64> {
        let (c, n) = self.guessing[slot.index()];
        (n > 0).then(|| f64::from(c) / f64::from(n))
    }

    /// Communicative success over all valid communication trials.
    pub fn overall_success(&self) -> Option<f64> {
        let (s, v) = self.rounds.values().fold((0, 0), |(s, v), t| (s + t.successes, v + t.valid));
        (v > 0).then(|| f64::from(s) / f64::from(v))
    }
}

/// Rebuilds the state of one session from its records.
pub fn replay(records: &[EventRecord]) -> Result<SessionState, EngineError> {
    let mut state = SessionState { incomplete: true, ..Default::default() };
    for r in records {
        state.apply(r)?;
    }
    Ok(state)
}

/// Splits a multi-session log by session id, preserving record order.
pub fn group_by_session(records: Vec<EventRecord>) -> BTreeMap<String, Vec<EventRecord>> {
    let mut out: BTreeMap<String, Vec<EventRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.session_id.clone()).or_default().push(r);
    }
    out
}
