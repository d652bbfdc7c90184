use std::time::{Duration, Instant};

use super::{Agent, AgentError, AgentMemory, Feedback, LabelMode, Produced, Role, TrialCtx};
use crate::engine::BlockKind;
use crate::language::{Label, Meaning};
use crate::protocol::{ClientMessage, FeedbackPayload, ServerBody, ServerMessage, TaskPayload};

/// Transport to one participant. Implementations own reconnection: `recv`
/// returns `Ok(None)` when `timeout` elapses and `Err(Aborted)` once the
/// participant has been gone longer than the grace period.
pub trait ParticipantChannel: Send {
    fn send(&mut self, msg: ServerMessage) -> Result<(), AgentError>;
    fn recv(&mut self, timeout: Duration) -> Result<Option<ClientMessage>, AgentError>;
}

fn instructions(block: BlockKind) -> &'static str {
    match block {
        BlockKind::Exposure => "Study each picture and its word.",
        BlockKind::Guessing => "Pick the word that belongs to the picture.",
        BlockKind::Labelling => "Type the word for each picture.",
        BlockKind::Communication => {
            "Take turns with your partner. When you are the speaker, type a word for the picture. When you are the listener, pick the picture your partner named."
        }
        BlockKind::Testing => "Type the word for each picture, including ones you have not seen.",
    }
}

/// Turns engine calls into protocol messages and waits for valid answers.
pub struct HumanProxy<C: ParticipantChannel> {
    channel: C,
    timeout: Duration,
    block: Option<BlockKind>,
}

impl<C: ParticipantChannel> HumanProxy<C> {
    pub fn new(channel: C, timeout: Duration) -> Self {
        HumanProxy { channel, timeout, block: None }
    }

    pub fn into_channel(self) -> C {
        self.channel
    }

    fn send(&mut self, ctx: &TrialCtx, trial: Option<u32>, body: ServerBody) -> Result<(), AgentError> {
        self.channel.send(ServerMessage { session_id: ctx.session_id.clone(), trial_index: trial, body })
    }

    fn enter_block(&mut self, ctx: &TrialCtx) -> Result<(), AgentError> {
        if self.block != Some(ctx.block) {
            self.block = Some(ctx.block);
            let text = instructions(ctx.block).to_string();
            self.send(ctx, None, ServerBody::Instructions { block: ctx.block, text })?;
        }
        Ok(())
    }

    /// Sends `task` and waits for an answer to this trial that `parse`
    /// accepts. Answers to earlier trials are dropped, other mismatched ones
    /// get the task resent; one malformed answer is tolerated with a re-prompt.
    fn ask<T>(
        &mut self,
        ctx: &TrialCtx,
        task: TaskPayload,
        parse: impl Fn(&ClientMessage) -> Option<T>,
    ) -> Result<T, AgentError> {
        self.enter_block(ctx)?;
        let body = ServerBody::Task(task);
        self.send(ctx, Some(ctx.trial_index), body.clone())?;
        let deadline = Instant::now() + self.timeout;
        let mut reprompted = false;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(AgentError::Unavailable("participant did not answer in time".into()));
            }
            let Some(msg) = self.channel.recv(left)? else { continue };
            if msg.kind != "answer" {
                continue;
            }
            match msg.trial_index {
                // late duplicates of answered trials
                Some(i) if i < ctx.trial_index => continue,
                Some(i) if i == ctx.trial_index => {}
                _ => {
                    self.send(ctx, Some(ctx.trial_index), body.clone())?;
                    continue;
                }
            }
            if let Some(v) = parse(&msg) {
                return Ok(v);
            }
            if reprompted {
                return Err(AgentError::Protocol("malformed answer".into()));
            }
            reprompted = true;
            self.send(ctx, Some(ctx.trial_index), ServerBody::Error { message: "malformed answer, please retry".into() })?;
            self.send(ctx, Some(ctx.trial_index), body.clone())?;
        }
    }
}

fn choice_below(n: usize) -> impl Fn(&ClientMessage) -> Option<usize> {
    move |m| m.choice_index().filter(|&i| i < n)
}

fn label_answer(m: &ClientMessage) -> Option<Produced> {
    let raw = m.label()?;
    Produced::from_raw(raw).ok()
}

impl<C: ParticipantChannel> Agent for HumanProxy<C> {
    fn expose(&mut self, ctx: &TrialCtx, meaning: &Meaning, label: &Label) -> Result<(), AgentError> {
        let task = TaskPayload::Exposure { stimulus: *meaning, label: label.clone() };
        self.ask(ctx, task, |_| Some(()))
    }

    fn guess_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, candidates: &[Label]) -> Result<usize, AgentError> {
        let task = TaskPayload::Guessing { stimulus: *meaning, labels: candidates.to_vec() };
        self.ask(ctx, task, choice_below(candidates.len()))
    }

    fn produce_label(&mut self, ctx: &TrialCtx, meaning: &Meaning, mode: LabelMode) -> Result<Produced, AgentError> {
        let task = match mode {
            LabelMode::Labelling => TaskPayload::Labelling { stimulus: *meaning },
            LabelMode::Communication => {
                TaskPayload::Speaker { round_id: ctx.round_id.unwrap_or(0), stimulus: *meaning }
            }
            LabelMode::Testing => TaskPayload::Testing { stimulus: *meaning },
        };
        self.ask(ctx, task, label_answer)
    }

    fn choose_meaning(&mut self, ctx: &TrialCtx, label: &Label, candidates: &[Meaning]) -> Result<usize, AgentError> {
        let task = TaskPayload::Listener {
            round_id: ctx.round_id.unwrap_or(0),
            label: label.clone(),
            candidates: candidates.to_vec(),
        };
        self.ask(ctx, task, choice_below(candidates.len()))
    }

    fn adopt_label(&mut self, _: &Meaning, _: &Label, _: u64) {}

    fn feedback(&mut self, ctx: &TrialCtx, fb: &Feedback) {
        let payload = FeedbackPayload {
            success: fb.success,
            role: fb.role,
            label: fb.label.clone(),
            chosen: fb.chosen,
            intended: (fb.role == Role::Speaker || fb.reveal_target).then_some(fb.target),
        };
        if let Err(e) = self.send(ctx, Some(ctx.trial_index), ServerBody::Feedback(payload)) {
            log::warn!("feedback not delivered: {e}");
        }
    }

    fn memory(&self) -> Option<&AgentMemory> {
        None
    }

    fn finish(&mut self, ctx: &TrialCtx, reason: Option<&str>) {
        let body = match reason {
            None => ServerBody::Finished {},
            Some(r) => ServerBody::Aborted { reason: r.to_string() },
        };
        let _ = self.send(ctx, None, body);
    }
}
