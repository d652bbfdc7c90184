//! Scripted agents with known behaviour, used as test oracles and baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, AgentMemory, Feedback, LabelMode, Produced, TrialCtx};
use crate::language::{
    enumerate_meanings, meaning_distance, normalized_edit_distance, random_label, Attribute, Label, Meaning, Vocabulary,
};
use crate::rng::{derive_seed, stream, SimRng};

/// Index of the smallest key; ties go to the lowest index.
fn argmin<T: PartialOrd + Copy>(keys: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, k) in keys.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((i, k));
        }
    }
    best.map_or(0, |(i, _)| i)
}

fn check_candidates<T>(c: &[T]) -> Result<(), AgentError> {
    if c.is_empty() {
        return Err(AgentError::InvalidArgument("no candidates".into()));
    }
    Ok(())
}

/// Per-attribute symbol table: `table[attribute][value]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharTable(pub [[String; 3]; 3]);

impl Default for CharTable {
    fn default() -> Self {
        let row = |a: &str, b: &str, c: &str| [a.to_string(), b.to_string(), c.to_string()];
        CharTable([row("t", "k", "p"), row("o", "a", "e"), row("s", "n", "w")])
    }
}

/// A fully compositional speaker: each attribute value maps to a fixed
/// segment, concatenated in a fixed attribute order.
#[derive(Debug, Clone)]
pub struct CompositionalBot {
    order: [Attribute; 3],
    table: CharTable,
}

impl Default for CompositionalBot {
    fn default() -> Self {
        CompositionalBot::new(Attribute::ALL, CharTable::default())
    }
}

impl CompositionalBot {
    pub fn new(order: [Attribute; 3], table: CharTable) -> Self {
        CompositionalBot { order, table }
    }

    pub fn encode(&self, m: &Meaning) -> Label {
        let text: String = self
            .order
            .iter()
            .map(|&a| self.table.0[a as usize][m.value_index(a)].as_str())
            .collect();
        Label::sanitize(&text).expect("compositional table produces empty labels")
    }

    /// Exact inverse of `encode`, if the label is a codeword.
    pub fn decode(&self, label: &Label) -> Option<Meaning> {
        enumerate_meanings().into_iter().find(|m| &self.encode(m) == label)
    }

    fn closest_meaning(&self, label: &Label, candidates: &[Meaning]) -> usize {
        if let Some(m) = self.decode(label) {
            if let Some(i) = candidates.iter().position(|c| *c == m) {
                return i;
            }
        }
        argmin(candidates.iter().map(|c| normalized_edit_distance(label.as_str(), self.encode(c).as_str())))
    }
}

impl Agent for CompositionalBot {
    fn expose(&mut self, _: &TrialCtx, _: &Meaning, _: &Label) -> Result<(), AgentError> {
        Ok(())
    }

    fn guess_label(&mut self, _: &TrialCtx, meaning: &Meaning, candidates: &[Label]) -> Result<usize, AgentError> {
        check_candidates(candidates)?;
        let own = self.encode(meaning);
        Ok(argmin(candidates.iter().map(|l| normalized_edit_distance(own.as_str(), l.as_str()))))
    }

    fn produce_label(&mut self, _: &TrialCtx, meaning: &Meaning, _: LabelMode) -> Result<Produced, AgentError> {
        Ok(Produced::clean(self.encode(meaning)))
    }

    fn choose_meaning(&mut self, _: &TrialCtx, label: &Label, candidates: &[Meaning]) -> Result<usize, AgentError> {
        check_candidates(candidates)?;
        Ok(self.closest_meaning(label, candidates))
    }

    fn adopt_label(&mut self, _: &Meaning, _: &Label, _: u64) {}

    fn feedback(&mut self, _: &TrialCtx, _: &Feedback) {}

    fn memory(&self) -> Option<&AgentMemory> {
        None
    }
}

/// Stores the given language verbatim and reproduces it. Unknown meanings get
/// the label of the nearest known meaning.
#[derive(Debug, Clone, Default)]
pub struct MemorizerBot {
    memory: AgentMemory,
}

impl MemorizerBot {
    pub fn new() -> Self {
        Self::default()
    }

    fn label_for(&self, m: &Meaning) -> Option<&Label> {
        let entries = self.memory.vocabulary.entries();
        if entries.is_empty() {
            return None;
        }
        let i = argmin(entries.iter().map(|e| meaning_distance(&e.meaning, m)));
        Some(&entries[i].label)
    }
}

impl Agent for MemorizerBot {
    fn learn(&mut self, language: &Vocabulary) {
        self.memory.vocabulary = language.clone();
    }

    fn expose(&mut self, ctx: &TrialCtx, meaning: &Meaning, label: &Label) -> Result<(), AgentError> {
        self.memory.vocabulary.upsert(*meaning, label.clone(), u64::from(ctx.trial_index));
        Ok(())
    }

    fn guess_label(&mut self, _: &TrialCtx, meaning: &Meaning, candidates: &[Label]) -> Result<usize, AgentError> {
        check_candidates(candidates)?;
        let own = self.label_for(meaning).ok_or_else(|| AgentError::Protocol("empty memory".into()))?;
        Ok(argmin(candidates.iter().map(|l| normalized_edit_distance(own.as_str(), l.as_str()))))
    }

    fn produce_label(&mut self, _: &TrialCtx, meaning: &Meaning, _: LabelMode) -> Result<Produced, AgentError> {
        let label = self.label_for(meaning).ok_or_else(|| AgentError::Protocol("empty memory".into()))?;
        Ok(Produced::clean(label.clone()))
    }

    fn choose_meaning(&mut self, _: &TrialCtx, label: &Label, candidates: &[Meaning]) -> Result<usize, AgentError> {
        check_candidates(candidates)?;
        let mut keys = Vec::with_capacity(candidates.len());
        for c in candidates {
            let own = self.label_for(c).ok_or_else(|| AgentError::Protocol("empty memory".into()))?;
            keys.push(normalized_edit_distance(own.as_str(), label.as_str()));
        }
        Ok(argmin(keys))
    }

    fn adopt_label(&mut self, meaning: &Meaning, label: &Label, at: u64) {
        self.memory.adopt(meaning, label, at);
    }

    fn feedback(&mut self, _: &TrialCtx, feedback: &Feedback) {
        self.memory.record_outcome(&feedback.target, feedback.success);
    }

    fn memory(&self) -> Option<&AgentMemory> {
        Some(&self.memory)
    }

    fn restore(&mut self, memory: AgentMemory) {
        self.memory = memory;
    }
}

/// Wraps another agent and, with probability `epsilon`, replaces each
/// response by a uniformly random one. With `epsilon = 1` it plays at chance.
pub struct NoisyBot {
    base: Box<dyn super::Agent>,
    epsilon: f64,
    seed: u64,
    rng: SimRng,
    trial: Option<u32>,
}

impl NoisyBot {
    pub fn new(base: Box<dyn super::Agent>, epsilon: f64, seed: u64) -> Self {
        NoisyBot { base, epsilon: epsilon.clamp(0.0, 1.0), seed, rng: stream(seed, "noise"), trial: None }
    }

    /// Reseeds at each new trial so a resumed session draws the same noise.
    fn flip(&mut self, ctx: &TrialCtx) -> bool {
        if self.trial != Some(ctx.trial_index) {
            self.trial = Some(ctx.trial_index);
            self.rng = stream(derive_seed(self.seed, "noise"), &ctx.trial_index.to_string());
        }
        self.rng.gen::<f64>() < self.epsilon
    }
}

impl Agent for NoisyBot {
    fn learn(&mut self, language: &Vocabulary) {
        self.base.learn(language);
    }

    fn expose(&mut self, ctx: &TrialCtx, meaning: &Meaning, label: &Label) -> Result<(), AgentError> {
        self.base.expose(ctx, meaning, label)
    }

    fn guess_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, candidates: &[Label]) -> Result<usize, AgentError> {
        check_candidates(candidates)?;
        if self.flip(ctx) {
            return Ok(self.rng.gen_range(0..candidates.len()));
        }
        self.base.guess_label(ctx, meaning, candidates)
    }

    fn produce_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, mode: LabelMode) -> Result<Produced, AgentError> {
        if self.flip(ctx) {
            return Ok(Produced::clean(random_label(&mut self.rng)));
        }
        self.base.produce_label(ctx, meaning, mode)
    }

    fn choose_meaning(&mut self, ctx: &TrialCtx, label: &Label, candidates: &[Meaning]) -> Result<usize, AgentError> {
        check_candidates(candidates)?;
        if self.flip(ctx) {
            return Ok(self.rng.gen_range(0..candidates.len()));
        }
        self.base.choose_meaning(ctx, label, candidates)
    }

    fn adopt_label(&mut self, meaning: &Meaning, label: &Label, at: u64) {
        self.base.adopt_label(meaning, label, at);
    }

    fn feedback(&mut self, ctx: &TrialCtx, feedback: &Feedback) {
        self.base.feedback(ctx, feedback);
    }

    fn memory(&self) -> Option<&AgentMemory> {
        self.base.memory()
    }

    fn restore(&mut self, memory: AgentMemory) {
        self.base.restore(memory);
    }
}
