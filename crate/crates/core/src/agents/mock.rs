//! Offline clients: a deterministic in-context "learner" and a scripted
//! response queue.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::client::{cut_completion, ClientError, CompletionClient};
use super::prompt::{parse_line, PromptBundle};
use crate::language::{meaning_distance, normalized_edit_distance, Meaning};

/// Nearest-neighbour stand-in for a language model.
///
/// Completion copies the word of the closest vocabulary line (exact match
/// first, then Hamming distance, preferring lines marked successful, then
/// prompt order). Continuation scores are log-similarities, split over
/// three-character pseudo-tokens.
#[derive(Debug, Default, Clone, Copy)]
pub struct HeuristicClient;

fn pseudo_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(3).max(1)
}

fn nearest<'a>(vocab: &'a [(Meaning, String, Option<bool>)], q: &Meaning) -> Option<&'a (Meaning, String, Option<bool>)> {
    vocab.iter().min_by_key(|(m, _, s)| (meaning_distance(m, q), u8::from(*s != Some(true))))
}

impl CompletionClient for HeuristicClient {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, ClientError> {
        let q = bundle.query_meaning().ok_or_else(|| ClientError::Decode("prompt has no query line".into()))?;
        let vocab = bundle.vocabulary();
        let (_, word, _) = nearest(&vocab, &q).ok_or_else(|| ClientError::Decode("prompt has no vocabulary".into()))?;
        Ok(format!("{word}'}}"))
    }

    fn continuation_logprobs(&self, bundle: &PromptBundle, continuation: &str) -> Result<Vec<f64>, ClientError> {
        let vocab = bundle.vocabulary();
        let similarity = if let Some((m, Some(word))) = parse_line(continuation) {
            vocab
                .iter()
                .map(|(vm, vw, _)| {
                    (1.0 - normalized_edit_distance(&word, vw)) * (1.0 - meaning_distance(&m, vm) as f64 / 3.0)
                })
                .fold(0.0, f64::max)
        } else {
            let q = bundle.query_meaning().ok_or_else(|| ClientError::Decode("prompt has no query line".into()))?;
            let word = cut_completion(continuation);
            nearest(&vocab, &q).map_or(0.0, |(_, w, _)| 1.0 - normalized_edit_distance(word, w))
        };
        let lp = (1e-3 + similarity).ln();
        Ok(vec![lp; pseudo_tokens(continuation)])
    }
}

/// One scripted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScriptStep {
    Complete(String),
    Logprobs(Vec<f64>),
    Error(String),
}

/// Replays a fixed queue of responses, one per request, in order.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    steps: Mutex<VecDeque<ScriptStep>>,
}

impl ScriptedClient {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        ScriptedClient { steps: Mutex::new(steps.into_iter().collect()) }
    }

    /// Reads a JSONL file of steps such as `{"complete":"giniwite'}"}`,
    /// `{"logprobs":[-1.0,-0.5]}` or `{"error":"transport"}`.
    pub fn from_file(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClientError::Transport(e.to_string()))?;
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ClientError::Decode(format!("{l}: {e}"))))
            .collect::<Result<Vec<ScriptStep>, _>>()?;
        Ok(ScriptedClient::new(steps))
    }

    pub fn remaining(&self) -> usize {
        self.steps.lock().expect("script mutex poisoned").len()
    }

    fn next(&self) -> Result<ScriptStep, ClientError> {
        let step = self
            .steps
            .lock()
            .expect("script mutex poisoned")
            .pop_front()
            .ok_or_else(|| ClientError::Transport("script exhausted".into()))?;
        match step {
            ScriptStep::Error(kind) if kind == "capability" => Err(ClientError::Capability("scripted".into())),
            ScriptStep::Error(kind) => Err(ClientError::Transport(kind)),
            s => Ok(s),
        }
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, _bundle: &PromptBundle) -> Result<String, ClientError> {
        match self.next()? {
            ScriptStep::Complete(s) => Ok(s),
            other => Err(ClientError::Decode(format!("expected completion, script has {other:?}"))),
        }
    }

    fn continuation_logprobs(&self, _bundle: &PromptBundle, _continuation: &str) -> Result<Vec<f64>, ClientError> {
        match self.next()? {
            ScriptStep::Logprobs(v) => Ok(v),
            other => Err(ClientError::Decode(format!("expected logprobs, script has {other:?}"))),
        }
    }
}
