use std::time::Instant;

use super::schedule::{build_schedule, Task};
use super::{
    BlockKind, Candidate, Clock, EngineError, EventRecord, EventSink, SessionConfig, SessionState, Slot,
    SCHEMA_VERSION,
};
use crate::agents::{build_agent, Agent, AgentEnv, AgentError, Feedback, LabelMode, Produced, Role, TrialCtx};
use crate::language::{generate_holistic_language, split_train_test, Label, SplitSpec, Vocabulary};
use crate::rng::derive_seed;

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub state: SessionState,
    /// Reason the session stopped early, if it did.
    pub aborted: Option<String>,
}

impl SessionOutcome {
    pub fn completed(&self) -> bool {
        self.aborted.is_none() && !self.state.incomplete
    }
}

/// Result of one agent's turn in an individual block.
#[derive(Default)]
struct Turn {
    produced: Option<Produced>,
    choice: Option<usize>,
    success: Option<bool>,
    error: Option<AgentError>,
    latency_ms: u64,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis() as u64)
}

/// A two-agent session: schedule, agents and progress.
pub struct Session {
    config: SessionConfig,
    split: SplitSpec,
    language: Vocabulary,
    schedule: Vec<Task>,
    agents: [Box<dyn Agent>; 2],
    clock: Box<dyn Clock>,
    state: SessionState,
    /// Run individual-block turns of both agents concurrently.
    concurrent: bool,
    fresh: bool,
}

impl Session {
    /// Derives the split, initial language and schedule from the config seed.
    pub fn new(config: SessionConfig, agents: [Box<dyn Agent>; 2], clock: Box<dyn Clock>) -> Result<Self, EngineError> {
        config.validate()?;
        for slot in Slot::BOTH {
            config.descriptor(slot).validate().map_err(|source| EngineError::Agent { slot: slot.id(), source })?;
        }
        let split = split_train_test(derive_seed(config.seed, "split"));
        let language = generate_holistic_language(&split, derive_seed(config.seed, "language"))?;
        let schedule = build_schedule(&config, &split)?;
        let concurrent = Slot::BOTH.iter().any(|&s| {
            matches!(
                config.descriptor(s),
                crate::agents::AgentDescriptor::Llm { .. } | crate::agents::AgentDescriptor::HumanProxy { .. }
            )
        });
        let state = SessionState::new(config.session_id.clone(), config.condition, schedule.len() as u32);
        Ok(Session { config, split, language, schedule, agents, clock, state, concurrent, fresh: true })
    }

    /// Builds both agents from their descriptors.
    pub fn from_config(config: SessionConfig, env: &mut AgentEnv, clock: Box<dyn Clock>) -> Result<Self, EngineError> {
        let make = |slot: Slot, env: &mut AgentEnv| {
            build_agent(config.descriptor(slot), derive_seed(config.seed, &format!("agent-{}", slot.id())), env)
                .map_err(|source| EngineError::Agent { slot: slot.id(), source })
        };
        let a = make(Slot::A, env)?;
        let b = make(Slot::B, env)?;
        Session::new(config, [a, b], clock)
    }

    /// Continues a session from its logged records. Agents get the initial
    /// language and then the memory reconstructed from the log.
    pub fn resume(&mut self, records: &[EventRecord]) -> Result<(), EngineError> {
        let state = super::replay(records)?;
        if state.records > 0 && state.session_id != self.config.session_id {
            return Err(EngineError::MalformedLog(format!(
                "log belongs to {}, not {}",
                state.session_id, self.config.session_id
            )));
        }
        if state.records > 0 && state.initial_language != self.language {
            return Err(EngineError::MalformedLog("logged language does not match the config seed".into()));
        }
        for slot in Slot::BOTH {
            let agent = &mut self.agents[slot.index()];
            agent.learn(&self.language);
            agent.restore(state.memories[slot.index()].clone());
        }
        if let Some(last) = records.iter().map(|r| r.timestamp).max() {
            self.clock.resume_after(last);
        }
        self.state = state;
        self.state.condition = Some(self.config.condition);
        self.state.task_count = self.schedule.len() as u32;
        self.fresh = false;
        Ok(())
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn split(&self) -> &SplitSpec {
        &self.split
    }

    pub fn language(&self) -> &Vocabulary {
        &self.language
    }

    pub fn schedule(&self) -> &[Task] {
        &self.schedule
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn agent(&self, slot: Slot) -> &dyn Agent {
        self.agents[slot.index()].as_ref()
    }

    /// Runs all remaining trials, appending one record per agent turn.
    pub fn run(&mut self, sink: &mut dyn EventSink) -> Result<SessionOutcome, EngineError> {
        if self.fresh {
            for agent in &mut self.agents {
                agent.learn(&self.language);
            }
            self.fresh = false;
        }
        let started = Instant::now();
        let mut aborted = None;
        let start = self.state.next_trial as usize;
        for i in start..self.schedule.len() {
            if let Some(cap) = self.config.max_duration_ms {
                if started.elapsed().as_millis() as u64 > cap {
                    aborted = Some(EngineError::TimeCap(cap).to_string());
                    break;
                }
            }
            let task = self.schedule[i].clone();
            match self.run_task(&task, sink) {
                Ok(()) => {}
                Err(EngineError::Agent { slot, source }) if source.is_fatal() => {
                    log::warn!("session {} aborted at trial {i}: agent {slot}: {source}", self.config.session_id);
                    aborted = Some(format!("agent {slot}: {source}"));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let last = self.ctx(self.schedule.last().expect("schedule is never empty"));
        for agent in &mut self.agents {
            agent.finish(&last, aborted.as_deref());
        }
        Ok(SessionOutcome { state: self.state.clone(), aborted })
    }

    fn ctx(&self, task: &Task) -> TrialCtx {
        TrialCtx {
            session_id: self.config.session_id.clone(),
            block: task.block,
            round_id: task.round_id,
            trial_index: task.trial_index,
        }
    }

    fn base_record(&mut self, task: &Task) -> EventRecord {
        EventRecord {
            v: SCHEMA_VERSION,
            session_id: self.config.session_id.clone(),
            condition: self.config.condition,
            timestamp: self.clock.now_ms(),
            block_kind: task.block,
            round_id: task.round_id,
            trial_index: task.trial_index,
            task_count: self.schedule.len() as u32,
            agent_id: None,
            speaker_id: None,
            listener_id: None,
            target: task.target,
            produced_label: None,
            raw_label: None,
            candidates: Vec::new(),
            choice_index: None,
            success: None,
            latency_ms: None,
            error: None,
        }
    }

    fn emit(&mut self, rec: EventRecord, sink: &mut dyn EventSink) -> Result<(), EngineError> {
        sink.append(&rec)?;
        self.state.apply(&rec)
    }

    fn run_task(&mut self, task: &Task, sink: &mut dyn EventSink) -> Result<(), EngineError> {
        if task.block == BlockKind::Communication {
            return self.run_communication(task, sink);
        }
        let ctx = self.ctx(task);
        let turns: [Turn; 2] = {
            let language = &self.language;
            let [a, b] = &mut self.agents;
            if self.concurrent {
                std::thread::scope(|s| {
                    let hb = s.spawn(|| individual_turn(b.as_mut(), &ctx, task, language));
                    let ta = individual_turn(a.as_mut(), &ctx, task, language);
                    [ta, hb.join().expect("agent thread panicked")]
                })
            } else {
                [individual_turn(a.as_mut(), &ctx, task, language), individual_turn(b.as_mut(), &ctx, task, language)]
            }
        };
        // a fatal error drops the whole trial so a resumed run repeats it
        for (slot, turn) in Slot::BOTH.into_iter().zip(&turns) {
            if let Some(e) = turn.error.as_ref().filter(|e| e.is_fatal()) {
                return Err(EngineError::Agent { slot: slot.id(), source: e.clone() });
            }
        }
        let measures = self.clock.measures_latency();
        for (slot, turn) in Slot::BOTH.into_iter().zip(turns) {
            let mut rec = self.base_record(task);
            rec.agent_id = Some(slot.id().to_string());
            rec.candidates = match task.block {
                BlockKind::Exposure => self.language.label_of(&task.target).cloned().map(Candidate::Label).into_iter().collect(),
                BlockKind::Guessing => task
                    .candidates
                    .iter()
                    .filter_map(|m| self.language.label_of(m).cloned().map(Candidate::Label))
                    .collect(),
                _ => Vec::new(),
            };
            if let Some(p) = turn.produced {
                if p.raw != p.label.as_str() {
                    rec.raw_label = Some(p.raw);
                }
                rec.produced_label = Some(p.label);
            }
            rec.choice_index = turn.choice;
            rec.success = turn.success;
            rec.latency_ms = measures.then_some(turn.latency_ms);
            rec.error = turn.error.map(|e| e.to_string());
            self.emit(rec, sink)?;
        }
        Ok(())
    }

    fn run_communication(&mut self, task: &Task, sink: &mut dyn EventSink) -> Result<(), EngineError> {
        let ctx = self.ctx(task);
        let speaker = task.speaker.ok_or_else(|| EngineError::InvalidConfig("communication task without speaker".into()))?;
        let listener = speaker.other();
        let fatal = |slot: Slot, e: &AgentError| EngineError::Agent { slot: slot.id(), source: e.clone() };

        let (produced, t_speak) = timed(|| self.agents[speaker.index()].produce_label(&ctx, &task.target, LabelMode::Communication));
        let mut error = None;
        let mut latency = t_speak;
        let mut choice = None;
        let label: Option<Label> = match produced {
            Ok(ref p) => Some(p.label.clone()),
            Err(ref e) if e.is_fatal() => return Err(fatal(speaker, e)),
            Err(ref e) => {
                error = Some(format!("speaker: {e}"));
                None
            }
        };
        if let Some(l) = &label {
            self.agents[speaker.index()].adopt_label(&task.target, l, u64::from(task.trial_index));
            let (chosen, t_listen) = timed(|| self.agents[listener.index()].choose_meaning(&ctx, l, &task.candidates));
            latency += t_listen;
            match chosen {
                Ok(i) if i < task.candidates.len() => choice = Some(i),
                Ok(i) => error = Some(format!("listener: choice index {i} out of range")),
                Err(e) if e.is_fatal() => return Err(fatal(listener, &e)),
                Err(e) => error = Some(format!("listener: {e}")),
            }
        }
        let chosen = choice.map(|i| task.candidates[i]);
        let success = chosen.map(|m| m == task.target);
        for (slot, role) in [(speaker, Role::Speaker), (listener, Role::Listener)] {
            let fb = Feedback {
                role,
                target: task.target,
                label: label.clone(),
                chosen,
                success,
                reveal_target: self.config.reveal_target,
            };
            self.agents[slot.index()].feedback(&ctx, &fb);
        }

        let mut rec = self.base_record(task);
        rec.speaker_id = Some(speaker.id().to_string());
        rec.listener_id = Some(listener.id().to_string());
        if let Ok(p) = produced {
            if p.raw != p.label.as_str() {
                rec.raw_label = Some(p.raw);
            }
        }
        rec.produced_label = label;
        rec.candidates = task.candidates.iter().copied().map(Candidate::Meaning).collect();
        rec.choice_index = choice;
        rec.success = success;
        rec.latency_ms = self.clock.measures_latency().then_some(latency);
        rec.error = error;
        self.emit(rec, sink)
    }
}

fn individual_turn(agent: &mut dyn Agent, ctx: &TrialCtx, task: &Task, language: &Vocabulary) -> Turn {
    let mut turn = Turn::default();
    let label_of = |m| {
        language
            .label_of(m)
            .cloned()
            .ok_or_else(|| AgentError::InvalidArgument(format!("no label for {m:?} in the initial language")))
    };
    let (res, ms) = timed(|| -> Result<(), AgentError> {
        match task.block {
            BlockKind::Exposure => agent.expose(ctx, &task.target, &label_of(&task.target)?),
            BlockKind::Guessing => {
                let labels = task.candidates.iter().map(label_of).collect::<Result<Vec<_>, _>>()?;
                let i = agent.guess_label(ctx, &task.target, &labels)?;
                if i >= labels.len() {
                    return Err(AgentError::Protocol(format!("choice index {i} out of range")));
                }
                turn.choice = Some(i);
                turn.success = Some(task.candidates[i] == task.target);
                Ok(())
            }
            BlockKind::Labelling | BlockKind::Testing => {
                let mode = if task.block == BlockKind::Labelling { LabelMode::Labelling } else { LabelMode::Testing };
                let p = agent.produce_label(ctx, &task.target, mode)?;
                if mode.updates_vocabulary() {
                    agent.adopt_label(&task.target, &p.label, u64::from(task.trial_index));
                }
                turn.produced = Some(p);
                Ok(())
            }
            BlockKind::Communication => unreachable!("communication is a joint task"),
        }
    });
    turn.latency_ms = ms;
    if let Err(e) = res {
        turn.error = Some(e);
    }
    turn
}
