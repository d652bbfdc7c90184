use std::sync::Arc;
use std::time::{Duration, Instant};

use super::client::{score_candidates, CompletionClient, ScoreNorm};
use super::prompt::{build_labelling_prompt, build_listener_prompt, listener_candidate, PromptMode};
use super::{Agent, AgentError, AgentMemory, Feedback, LabelMode, Produced, TrialCtx};
use crate::language::{Label, Meaning, Vocabulary};
use crate::rng::{derive_seed, stream, SimRng};

/// An in-context learner backed by a completion endpoint. Its whole memory is
/// the vocabulary rendered into each prompt.
pub struct LlmAgent {
    client: Arc<dyn CompletionClient>,
    norm: ScoreNorm,
    timeout: Duration,
    memory: AgentMemory,
    seed: u64,
}

impl LlmAgent {
    pub fn new(client: Arc<dyn CompletionClient>, norm: ScoreNorm, timeout: Duration, seed: u64) -> Self {
        LlmAgent { client, norm, timeout, memory: AgentMemory::default(), seed }
    }

    /// Prompt-order randomness is keyed by trial so resumed sessions replay it.
    fn rng(&self, ctx: &TrialCtx) -> SimRng {
        stream(derive_seed(self.seed, "prompt-order"), &ctx.trial_index.to_string())
    }

    fn timed<T>(&self, f: impl FnOnce() -> Result<T, AgentError>) -> Result<T, AgentError> {
        let start = Instant::now();
        let out = f()?;
        if start.elapsed() > self.timeout {
            return Err(AgentError::Timeout(self.timeout));
        }
        Ok(out)
    }
}

impl Agent for LlmAgent {
    fn learn(&mut self, language: &Vocabulary) {
        self.memory.vocabulary = language.clone();
    }

    fn expose(&mut self, ctx: &TrialCtx, meaning: &Meaning, label: &Label) -> Result<(), AgentError> {
        self.memory.vocabulary.upsert(*meaning, label.clone(), u64::from(ctx.trial_index));
        Ok(())
    }

    fn guess_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, candidates: &[Label]) -> Result<usize, AgentError> {
        let bundle = build_labelling_prompt(&self.memory, meaning, PromptMode::Lookup, &mut self.rng(ctx));
        let conts: Vec<String> = candidates.iter().map(|l| format!("{}'}}", l.as_str())).collect();
        self.timed(|| score_candidates(&bundle, &conts, self.client.as_ref(), self.norm))
    }

    fn produce_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, mode: LabelMode) -> Result<Produced, AgentError> {
        let prompt_mode = match mode {
            LabelMode::Labelling => PromptMode::Lookup,
            LabelMode::Communication => PromptMode::Communication,
            LabelMode::Testing => PromptMode::Testing,
        };
        let bundle = build_labelling_prompt(&self.memory, meaning, prompt_mode, &mut self.rng(ctx));
        let raw = self.timed(|| Ok(self.client.complete(&bundle)?))?;
        Produced::from_raw(super::client::cut_completion(&raw)).map(|p| Produced { raw, ..p })
    }

    fn choose_meaning(&mut self, ctx: &TrialCtx, label: &Label, candidates: &[Meaning]) -> Result<usize, AgentError> {
        let bundle = build_listener_prompt(&self.memory, &mut self.rng(ctx));
        let conts: Vec<String> = candidates.iter().map(|m| listener_candidate(m, label.as_str())).collect();
        self.timed(|| score_candidates(&bundle, &conts, self.client.as_ref(), self.norm))
    }

    fn adopt_label(&mut self, meaning: &Meaning, label: &Label, at: u64) {
        self.memory.adopt(meaning, label, at);
    }

    fn feedback(&mut self, _ctx: &TrialCtx, feedback: &Feedback) {
        self.memory.record_outcome(&feedback.target, feedback.success);
    }

    fn memory(&self) -> Option<&AgentMemory> {
        Some(&self.memory)
    }

    fn restore(&mut self, memory: AgentMemory) {
        self.memory = memory;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::mock::{HeuristicClient, ScriptStep, ScriptedClient};
    use crate::engine::BlockKind;
    use crate::language::{Colour, Label};

    fn ctx() -> TrialCtx {
        TrialCtx { session_id: "t".into(), block: BlockKind::Labelling, round_id: None, trial_index: 60 }
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_pairs([
            (Meaning::new(1, Colour::Orange, 1).unwrap(), Label::new("wate").unwrap()),
            (Meaning::new(2, Colour::Blue, 2).unwrap(), Label::new("kogu").unwrap()),
            (Meaning::new(3, Colour::Green, 3).unwrap(), Label::new("sinifa").unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn raw_completion_is_cut_and_kept() {
        let client = Arc::new(ScriptedClient::new([ScriptStep::Complete("Pufe'}\nmore".into())]));
        let mut agent = LlmAgent::new(client, ScoreNorm::PerToken, Duration::from_secs(5), 1);
        agent.learn(&vocab());
        let p = agent.produce_label(&ctx(), &Meaning::new(1, Colour::Blue, 1).unwrap(), LabelMode::Testing).unwrap();
        assert_eq!(p.label.as_str(), "pufe");
        assert_eq!(p.raw, "Pufe'}\nmore");
    }

    #[test]
    fn empty_completion_is_an_error() {
        let client = Arc::new(ScriptedClient::new([ScriptStep::Complete("'}".into())]));
        let mut agent = LlmAgent::new(client, ScoreNorm::PerToken, Duration::from_secs(5), 1);
        agent.learn(&vocab());
        let err = agent.produce_label(&ctx(), &Meaning::new(1, Colour::Blue, 1).unwrap(), LabelMode::Testing);
        assert_eq!(err, Err(AgentError::EmptyLabel));
    }

    #[test]
    fn listener_picks_best_scored_candidate() {
        let client = Arc::new(ScriptedClient::new([
            ScriptStep::Logprobs(vec![-3.0, -3.0]),
            ScriptStep::Logprobs(vec![-0.5]),
            ScriptStep::Logprobs(vec![-0.5, -0.5, -0.5]),
        ]));
        let mut agent = LlmAgent::new(client, ScoreNorm::PerToken, Duration::from_secs(5), 1);
        agent.learn(&vocab());
        let cands: Vec<Meaning> = vocab().meanings().collect();
        let i = agent.choose_meaning(&ctx(), &Label::new("kogu").unwrap(), &cands).unwrap();
        // equal per-token scores resolve to the lower index
        assert_eq!(i, 1);
    }

    #[test]
    fn heuristic_learner_reproduces_vocabulary() {
        let mut agent = LlmAgent::new(Arc::new(HeuristicClient), ScoreNorm::PerToken, Duration::from_secs(5), 2);
        agent.learn(&vocab());
        let m = Meaning::new(2, Colour::Blue, 2).unwrap();
        let p = agent.produce_label(&ctx(), &m, LabelMode::Labelling).unwrap();
        assert_eq!(p.label.as_str(), "kogu");
        let labels: Vec<Label> = vocab().entries().iter().map(|e| e.label.clone()).collect();
        assert_eq!(agent.guess_label(&ctx(), &m, &labels).unwrap(), 1);
        let cands: Vec<Meaning> = vocab().meanings().collect();
        assert_eq!(agent.choose_meaning(&ctx(), &Label::new("sinifa").unwrap(), &cands).unwrap(), 2);
    }
}
