use std::io::{self, BufRead, Write};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{BlockKind, Condition};
use crate::language::{Label, Meaning};

pub const SCHEMA_VERSION: u32 = 1;

/// A choice shown to an agent: a stimulus or a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidate {
    Meaning(Meaning),
    Label(Label),
}

/// One line of the JSONL event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventRecord {
    pub v: u32,
    pub session_id: String,
    pub condition: Condition,
    pub timestamp: u64,
    pub block_kind: BlockKind,
    pub round_id: Option<u32>,
    pub trial_index: u32,
    pub task_count: u32,
    /// Acting agent in individual blocks.
    pub agent_id: Option<String>,
    pub speaker_id: Option<String>,
    pub listener_id: Option<String>,
    pub target: Meaning,
    pub produced_label: Option<Label>,
    /// Verbatim production when it differs from the sanitized label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_label: Option<String>,
    pub candidates: Vec<Candidate>,
    pub choice_index: Option<usize>,
    pub success: Option<bool>,
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EventRecord {
    /// The agent whose action this record describes, if unambiguous.
    pub fn actor(&self) -> Option<&str> {
        self.agent_id.as_deref().or(self.speaker_id.as_deref())
    }
}

pub trait EventSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()>;
}

/// Writes one JSON object per line.
pub struct JsonlSink<W: Write> {
    out: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for JsonlSink<W> {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

#[derive(Debug, Default, Clone)]
pub struct VecSink {
    pub records: Vec<EventRecord>,
}

impl EventSink for VecSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

/// A sink shared by several sessions; appends are serialized by a mutex and
/// records carry their own session id.
#[derive(Clone)]
pub struct SharedSink {
    inner: Arc<Mutex<dyn EventSink + Send>>,
}

impl SharedSink {
    pub fn new<S: EventSink + Send + 'static>(sink: S) -> Self {
        SharedSink { inner: Arc::new(Mutex::new(sink)) }
    }
}

impl EventSink for SharedSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        self.inner.lock().expect("sink mutex poisoned").append(record)
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct LogReadReport {
    pub records: Vec<EventRecord>,
    /// (1-based line number, message) for skipped lines.
    pub warnings: Vec<(usize, String)>,
}

/// Strict reader: the first malformed line is an error.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<EventRecord>, super::EngineError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| super::EngineError::MalformedLog(format!("line {}: {e}", n + 1)))?;
        if rec.v != SCHEMA_VERSION {
            return Err(super::EngineError::MalformedLog(format!("line {}: unsupported schema v{}", n + 1, rec.v)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Lenient reader: malformed lines are skipped and reported.
pub fn read_log_lenient<R: BufRead>(input: R) -> io::Result<LogReadReport> {
    let mut report = LogReadReport::default();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EventRecord>(&line) {
            Ok(rec) if rec.v == SCHEMA_VERSION => report.records.push(rec),
            Ok(rec) => report.warnings.push((n + 1, format!("unsupported schema v{}", rec.v))),
            Err(e) => report.warnings.push((n + 1, e.to_string())),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::Colour;

    fn record() -> EventRecord {
        EventRecord {
            v: SCHEMA_VERSION,
            session_id: "s1".into(),
            condition: Condition::Ll,
            timestamp: 3,
            block_kind: BlockKind::Communication,
            round_id: Some(1),
            trial_index: 75,
            task_count: 222,
            agent_id: None,
            speaker_id: Some("A".into()),
            listener_id: Some("B".into()),
            target: Meaning::new(1, Colour::Green, 3).unwrap(),
            produced_label: Some(Label::new("pufe").unwrap()),
            raw_label: None,
            candidates: vec![
                Candidate::Meaning(Meaning::new(1, Colour::Green, 3).unwrap()),
                Candidate::Meaning(Meaning::new(2, Colour::Blue, 1).unwrap()),
            ],
            choice_index: Some(0),
            success: Some(true),
            latency_ms: None,
            error: None,
        }
    }

    #[test]
    fn jsonl_roundtrip_and_field_names() {
        let mut sink = JsonlSink::new(Vec::new());
        sink.append(&record()).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        assert!(text.ends_with('\n'));
        assert!(text.contains("\"v\":1"));
        assert!(text.contains("\"blockKind\":\"communication\""));
        assert!(text.contains("\"producedLabel\":\"pufe\""));
        assert!(!text.contains("rawLabel"));
        let back = read_log(text.as_bytes()).unwrap();
        assert_eq!(back, vec![record()]);
    }

    #[test]
    fn label_candidates_deserialize_as_labels() {
        let mut r = record();
        r.candidates = vec![Candidate::Label(Label::new("wa").unwrap())];
        let s = serde_json::to_string(&r).unwrap();
        let back: EventRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back.candidates, r.candidates);
    }

    #[test]
    fn lenient_reader_skips_garbage() {
        let good = serde_json::to_string(&record()).unwrap();
        let text = format!("{good}\nnot json\n\n{good}\n");
        let rep = read_log_lenient(text.as_bytes()).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.warnings.len(), 1);
        assert_eq!(rep.warnings[0].0, 2);
        assert!(read_log(text.as_bytes()).is_err());
    }
}
