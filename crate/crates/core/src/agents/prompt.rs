//! Prompt construction for in-context language learners.
//!
//! Vocabulary entries are rendered as single-quoted, JSON-like lines, e.g.
//! `{'shape':2,'colour':'orange','amount':1,'word':'giniwite'}`. They are not
//! normalized to JSON; the exact bytes are part of the contract.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::AgentMemory;
use crate::language::Meaning;
use crate::rng::SimRng;

pub const PROMPT_VERSION: &str = "prompts-v1";

pub const LEARNER_SYSTEM: &str = "You are a language learner who has to learn an artificial language with words and their corresponding features. Your task is to complete the vocabulary by generating a word that describes the last item. Only respond with the word.";

pub const COMMUNICATION_FRAMING: &str = "You are playing a cooperative naming game. Use the vocabulary to name items for your partner, and to identify items your partner names. Communicative success is important.";

/// Which entries appear in the prompt and how they are annotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    /// Labelling and guessing blocks: the stimulus's own entry is shown.
    Lookup,
    /// Communication: own entry omitted, success attribute on every line.
    Communication,
    /// Testing: own entry omitted, no success attribute.
    Testing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub prefill_text: Option<String>,
}

pub fn system_text(mode: PromptMode) -> String {
    match mode {
        PromptMode::Communication => format!("{LEARNER_SYSTEM} {COMMUNICATION_FRAMING}"),
        _ => LEARNER_SYSTEM.to_string(),
    }
}

fn attributes(m: &Meaning) -> String {
    format!("'shape':{},'colour':'{}','amount':{}", m.shape(), m.colour(), m.amount())
}

/// A complete vocabulary line.
pub fn stimulus_line(m: &Meaning, word: &str, success: Option<bool>) -> String {
    match success {
        Some(s) => format!("{{{},'word':'{}','communicativeSuccess':{}}}", attributes(m), word, u8::from(s)),
        None => format!("{{{},'word':'{}'}}", attributes(m), word),
    }
}

/// The open query line; the completion continues right after `'word':'`.
pub fn query_line(m: &Meaning) -> String {
    format!("{{{},'word':'", attributes(m))
}

/// Line prefix a listener candidate is scored against: the stimulus with the
/// heard word filled in.
pub fn listener_candidate(m: &Meaning, word: &str) -> String {
    format!("{{{},'word':'{}'}}", attributes(m), word)
}

fn vocabulary_lines(
    memory: &AgentMemory,
    omit: &[Meaning],
    with_success: bool,
    rng: &mut SimRng,
) -> Vec<String> {
    let mut entries: Vec<_> = memory
        .vocabulary
        .entries()
        .iter()
        .filter(|e| !omit.contains(&e.meaning))
        .collect();
    entries.shuffle(rng);
    entries
        .iter()
        .map(|e| stimulus_line(&e.meaning, e.label.as_str(), with_success.then_some(e.last_success)))
        .collect()
}

/// Prompt for producing (or, in lookup mode, guessing) the label of `stimulus`.
pub fn build_labelling_prompt(
    memory: &AgentMemory,
    stimulus: &Meaning,
    mode: PromptMode,
    rng: &mut SimRng,
) -> PromptBundle {
    let omit: &[Meaning] = match mode {
        PromptMode::Lookup => &[],
        _ => std::slice::from_ref(stimulus),
    };
    let mut lines = vocabulary_lines(memory, omit, mode == PromptMode::Communication, rng);
    lines.push(query_line(stimulus));
    PromptBundle { system_text: system_text(mode), user_text: lines.join("\n"), prefill_text: None }
}

/// Prompt for a listener choosing among candidate stimuli. The listener's
/// whole vocabulary is shown, so nothing in it marks one candidate as the target.
pub fn build_listener_prompt(memory: &AgentMemory, rng: &mut SimRng) -> PromptBundle {
    let lines = vocabulary_lines(memory, &[], true, rng);
    PromptBundle {
        system_text: system_text(PromptMode::Communication),
        user_text: lines.join("\n"),
        prefill_text: None,
    }
}

impl PromptBundle {
    /// Raw single-string form using the Llama 3 header tokens, for endpoints
    /// without a chat template. Ends at the assistant header (plus prefill).
    pub fn render_raw(&self) -> String {
        format!(
            "<|begin_of_text|><|start_header_id|>system<|end_header_id|> {}<|eot_id|><|start_header_id|>user<|end_header_id|>\n{}<|eot_id|><|start_header_id|>assistant<|end_header_id|>{}",
            self.system_text,
            self.user_text,
            self.prefill_text.as_deref().unwrap_or("")
        )
    }

    /// Query meaning of the last user line, if it is an open query line.
    pub fn query_meaning(&self) -> Option<Meaning> {
        let last = self.user_text.lines().last()?;
        let (m, word) = parse_line(last)?;
        word.is_none().then_some(m)
    }

    /// Completed vocabulary lines in the user text, in prompt order.
    pub fn vocabulary(&self) -> Vec<(Meaning, String, Option<bool>)> {
        self.user_text
            .lines()
            .filter_map(|l| {
                let (m, w) = parse_line(l)?;
                let success = l.contains("'communicativeSuccess':1").then_some(true).or_else(|| {
                    l.contains("'communicativeSuccess':0").then_some(false)
                });
                w.map(|w| (m, w, success))
            })
            .collect()
    }
}

/// Parses a vocabulary or query line into its meaning and, when present, word.
pub fn parse_line(line: &str) -> Option<(Meaning, Option<String>)> {
    let body = line.trim().strip_prefix('{')?;
    let shape = field(body, "'shape':")?.parse().ok()?;
    let colour = crate::language::Colour::parse(field(body, "'colour':")?.trim_matches('\'')).ok()?;
    let amount = field(body, "'amount':")?.parse().ok()?;
    let m = Meaning::new(shape, colour, amount).ok()?;
    let word_start = body.find("'word':'")? + "'word':'".len();
    let rest = &body[word_start..];
    let word = rest.find('\'').map(|end| rest[..end].to_string());
    Some((m, word))
}

fn field<'a>(body: &'a str, key: &str) -> Option<&'a str> {
    let start = body.find(key)? + key.len();
    let rest = &body[start..];
    let end = rest.find([',', '}']).unwrap_or(rest.len());
    Some(&rest[..end])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::{Colour, Label, Vocabulary};
    use crate::rng;

    fn memory() -> AgentMemory {
        let ms = crate::language::split_train_test(4).train;
        let v = Vocabulary::from_pairs(
            ms.iter().enumerate().map(|(i, m)| (*m, Label::new(format!("wa{}", "to".repeat(i % 3 + 1))).unwrap())),
        )
        .unwrap();
        AgentMemory { vocabulary: v }
    }

    #[test]
    fn line_formats() {
        let m = Meaning::new(2, Colour::Orange, 1).unwrap();
        assert_eq!(stimulus_line(&m, "giniwite", None), "{'shape':2,'colour':'orange','amount':1,'word':'giniwite'}");
        assert_eq!(
            stimulus_line(&m, "giniwite", Some(true)),
            "{'shape':2,'colour':'orange','amount':1,'word':'giniwite','communicativeSuccess':1}"
        );
        let q = Meaning::new(1, Colour::Green, 3).unwrap();
        assert_eq!(query_line(&q), "{'shape':1,'colour':'green','amount':3,'word':'");
    }

    #[test]
    fn lookup_includes_own_entry() {
        let mem = memory();
        let target = mem.vocabulary.entries()[0].meaning;
        let b = build_labelling_prompt(&mem, &target, PromptMode::Lookup, &mut rng::stream(1, "p"));
        let lines: Vec<&str> = b.user_text.lines().collect();
        assert_eq!(lines.len(), 16);
        assert_eq!(*lines.last().unwrap(), query_line(&target));
        assert!(b.vocabulary().iter().any(|(m, _, _)| *m == target));
        assert_eq!(b.query_meaning(), Some(target));
        assert_eq!(b.system_text, LEARNER_SYSTEM);
    }

    #[test]
    fn communication_omits_target_and_marks_success() {
        let mem = memory();
        let target = mem.vocabulary.entries()[3].meaning;
        let b = build_labelling_prompt(&mem, &target, PromptMode::Communication, &mut rng::stream(1, "p"));
        let lines: Vec<&str> = b.user_text.lines().collect();
        assert_eq!(lines.len(), 15);
        assert!(lines[..14].iter().all(|l| l.contains("'communicativeSuccess':")));
        assert!(!b.vocabulary().iter().any(|(m, _, _)| *m == target));
        assert!(b.system_text.ends_with("Communicative success is important."));
        assert!(b.system_text.starts_with("You are a language learner who has to learn an artificial language"));
    }

    #[test]
    fn shuffle_changes_order_not_content() {
        let mem = memory();
        let target = mem.vocabulary.entries()[0].meaning;
        let a = build_labelling_prompt(&mem, &target, PromptMode::Testing, &mut rng::stream(1, "p"));
        let b = build_labelling_prompt(&mem, &target, PromptMode::Testing, &mut rng::stream(2, "p"));
        assert_ne!(a.user_text, b.user_text);
        let mut la: Vec<&str> = a.user_text.lines().collect();
        let mut lb: Vec<&str> = b.user_text.lines().collect();
        la.sort();
        lb.sort();
        assert_eq!(la, lb);
    }

    #[test]
    fn parse_line_roundtrip() {
        let m = Meaning::new(3, Colour::Blue, 2).unwrap();
        assert_eq!(parse_line(&stimulus_line(&m, "tusetetu", Some(false))), Some((m, Some("tusetetu".into()))));
        assert_eq!(parse_line(&query_line(&m)), Some((m, None)));
        assert_eq!(parse_line("garbage"), None);
    }
}
