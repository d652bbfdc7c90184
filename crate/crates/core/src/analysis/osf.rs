//! Best-effort import of trial-level CSV exports from the human study into
//! event-log records.
//!
//! Column names are matched case-insensitively against aliases:
//!
//! | field      | accepted headers                                   |
//! |------------|----------------------------------------------------|
//! | session    | sessionId, session, pair, pairId, pair_id, dyad    |
//! | condition  | condition, cond                                    |
//! | block      | block, blockKind, phase                            |
//! | round      | round, roundId, round_id                           |
//! | trial      | trial, trialIndex, trial_index                     |
//! | actor      | speakerId, speaker, participant, agentId, subject  |
//! | listener   | listenerId, listener                               |
//! | shape      | shape                                              |
//! | colour     | colour, color                                      |
//! | amount     | amount, number, count                              |
//! | label      | producedLabel, label, word, response, signal       |
//! | success    | success, correct, accuracy                         |
//!
//! Participants are mapped to seats `A`/`B` in order of first appearance in
//! each session. Without a trial column, trials are numbered in file order.

use std::collections::BTreeMap;
use std::io::Read;

use crate::engine::{BlockKind, Candidate, Condition, EventRecord, SCHEMA_VERSION};
use crate::language::{Colour, Label, Meaning};

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing required column {0}")]
    MissingColumn(&'static str),
}

const ALIASES: [(&str, &[&str]); 12] = [
    ("session", &["sessionid", "session", "pair", "pairid", "pair_id", "dyad"]),
    ("condition", &["condition", "cond"]),
    ("block", &["block", "blockkind", "phase"]),
    ("round", &["round", "roundid", "round_id"]),
    ("trial", &["trial", "trialindex", "trial_index"]),
    ("actor", &["speakerid", "speaker", "participant", "agentid", "subject"]),
    ("listener", &["listenerid", "listener"]),
    ("shape", &["shape"]),
    ("colour", &["colour", "color"]),
    ("amount", &["amount", "number", "count"]),
    ("label", &["producedlabel", "label", "word", "response", "signal"]),
    ("success", &["success", "correct", "accuracy"]),
];

fn parse_block(s: &str) -> Option<BlockKind> {
    let s = s.trim().to_ascii_lowercase();
    Some(match s.as_str() {
        x if x.starts_with("expos") => BlockKind::Exposure,
        x if x.starts_with("guess") => BlockKind::Guessing,
        x if x.starts_with("label") || x.starts_with("train") => BlockKind::Labelling,
        x if x.starts_with("comm") || x.starts_with("game") || x.starts_with("interact") => BlockKind::Communication,
        x if x.starts_with("test") => BlockKind::Testing,
        _ => return None,
    })
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" | "correct" => Some(true),
        "0" | "0.0" | "false" | "no" | "incorrect" => Some(false),
        _ => None,
    }
}

fn parse_shape_or_amount(s: &str) -> Option<u8> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "one" | "circle" => Some(1),
        "two" | "triangle" => Some(2),
        "three" | "square" => Some(3),
        _ => s.parse::<f64>().ok().map(|v| v as u8),
    }
}

/// Import outcome: records grouped by session, plus skipped-row notes.
#[derive(Debug, Default)]
pub struct Imported {
    pub sessions: BTreeMap<String, Vec<EventRecord>>,
    pub warnings: Vec<String>,
}

pub fn import_csv<R: Read>(input: R, default_condition: Condition) -> Result<Imported, ImportError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let col: BTreeMap<&str, usize> = ALIASES
        .iter()
        .filter_map(|(field, names)| {
            names.iter().find_map(|n| headers.iter().position(|h| h == n)).map(|i| (*field, i))
        })
        .collect();
    for required in ["session", "block", "shape", "colour", "amount"] {
        if !col.contains_key(required) {
            return Err(ImportError::MissingColumn(required));
        }
    }

    let mut out = Imported::default();
    let mut seats: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut counters: BTreeMap<String, u32> = BTreeMap::new();
    let mut rows: Vec<EventRecord> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let get = |f: &str| col.get(f).and_then(|&i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty());
        let session = get("session").unwrap_or_default().to_string();
        let Some(block) = get("block").and_then(parse_block) else {
            out.warnings.push(format!("line {line}: unknown block"));
            continue;
        };
        let meaning = (|| {
            let shape = parse_shape_or_amount(get("shape")?)?;
            let colour = Colour::parse(&get("colour")?.to_ascii_lowercase()).ok()?;
            let amount = parse_shape_or_amount(get("amount")?)?;
            Meaning::new(shape, colour, amount).ok()
        })();
        let Some(target) = meaning else {
            out.warnings.push(format!("line {line}: unreadable stimulus"));
            continue;
        };
        let condition = get("condition").and_then(Condition::parse).unwrap_or(default_condition);
        let seat = |who: Option<&str>, seats: &mut BTreeMap<String, Vec<String>>| -> Option<String> {
            let who = who?;
            let list = seats.entry(session.clone()).or_default();
            let i = list.iter().position(|p| p == who).unwrap_or_else(|| {
                list.push(who.to_string());
                list.len() - 1
            });
            Some(if i == 0 { "A" } else { "B" }.to_string())
        };
        let actor = seat(get("actor"), &mut seats);
        let mut listener = seat(get("listener"), &mut seats);
        let counter = counters.entry(session.clone()).or_insert(0);
        let trial_index = get("trial").and_then(|t| t.parse::<f64>().ok()).map(|t| t as u32).unwrap_or(*counter);
        *counter += 1;
        let label = get("label").and_then(Label::sanitize);
        let communication = block == BlockKind::Communication;
        if communication && listener.is_none() {
            listener = actor.as_deref().map(|a| if a == "A" { "B" } else { "A" }.to_string());
        }
        rows.push(EventRecord {
            v: SCHEMA_VERSION,
            session_id: session.clone(),
            condition,
            timestamp: 0,
            block_kind: block,
            round_id: if communication { get("round").and_then(|r| r.parse::<f64>().ok()).map(|r| r as u32) } else { None },
            trial_index,
            task_count: 0,
            agent_id: if communication { None } else { actor.clone().or(Some("A".into())) },
            speaker_id: if communication { actor.clone().or(Some("A".into())) } else { None },
            listener_id: if communication { listener } else { None },
            target,
            produced_label: if block == BlockKind::Exposure { None } else { label.clone() },
            raw_label: None,
            candidates: match (block, &label) {
                (BlockKind::Exposure, Some(l)) => vec![Candidate::Label(l.clone())],
                _ => Vec::new(),
            },
            choice_index: None,
            success: get("success").and_then(parse_flag),
            latency_ms: None,
            error: None,
        });
    }
    for r in rows {
        out.sessions.entry(r.session_id.clone()).or_default().push(r);
    }
    for recs in out.sessions.values_mut() {
        recs.sort_by_key(|r| r.trial_index);
        let count = recs.iter().map(|r| r.trial_index + 1).max().unwrap_or(0);
        for r in recs.iter_mut() {
            r.task_count = count;
        }
    }
    Ok(out)
}
