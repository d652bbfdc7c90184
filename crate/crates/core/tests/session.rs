use refgame::agents::AgentDescriptor;
use refgame::engine::{
    read_log, BlockKind, Condition, EventRecord, JsonlSink, LogicalClock, Session, SessionConfig, Slot, VecSink,
};
use refgame::language::TRAIN_SIZE;

fn config(seed: u64, a: AgentDescriptor, b: AgentDescriptor) -> SessionConfig {
    SessionConfig::new(format!("s{seed}"), Condition::Ll, seed, a, b)
}

fn run(cfg: SessionConfig) -> (Vec<EventRecord>, refgame::engine::SessionOutcome) {
    let mut env = Default::default();
    let mut session = Session::from_config(cfg, &mut env, Box::new(LogicalClock::default())).unwrap();
    let mut sink = VecSink::default();
    let out = session.run(&mut sink).unwrap();
    (sink.records, out)
}

#[test]
fn full_session_record_counts() {
    let (records, out) = run(config(1, AgentDescriptor::memorizer(), AgentDescriptor::memorizer()));
    assert!(out.completed());
    let count = |b| records.iter().filter(|r| r.block_kind == b).count();
    assert_eq!(count(BlockKind::Exposure), 2 * 2 * TRAIN_SIZE);
    assert_eq!(count(BlockKind::Guessing), 2 * 2 * TRAIN_SIZE);
    assert_eq!(count(BlockKind::Labelling), 2 * TRAIN_SIZE);
    assert_eq!(count(BlockKind::Communication), 120);
    assert_eq!(count(BlockKind::Testing), 2 * 27);
    assert_eq!(out.state.task_count, 222);
    assert_eq!(out.state.next_trial, 222);
    // every trial index is covered
    let mut idx: Vec<u32> = records.iter().map(|r| r.trial_index).collect();
    idx.dedup();
    assert_eq!(idx, (0..222).collect::<Vec<_>>());
}

#[test]
fn memorizers_and_compositional_bots_always_succeed() {
    for (a, b) in [
        (AgentDescriptor::memorizer(), AgentDescriptor::memorizer()),
        (AgentDescriptor::compositional(), AgentDescriptor::compositional()),
    ] {
        let (_, out) = run(config(7, a, b));
        assert_eq!(out.state.overall_success(), Some(1.0));
        assert!(out.state.guessing_accuracy(Slot::A).is_some());
    }
    let (_, out) = run(config(7, AgentDescriptor::memorizer(), AgentDescriptor::memorizer()));
    assert_eq!(out.state.guessing_accuracy(Slot::B), Some(1.0));
}

#[test]
fn listener_records_keep_target_among_candidates() {
    let (records, _) = run(config(3, AgentDescriptor::chance(), AgentDescriptor::chance()));
    for r in records.iter().filter(|r| r.block_kind == BlockKind::Communication) {
        assert_eq!(r.candidates.len(), 4);
        assert_ne!(r.speaker_id, r.listener_id);
        assert!(r.latency_ms.is_none());
    }
}

#[test]
fn deterministic_and_resumable() {
    let cfg = config(
        11,
        AgentDescriptor::noisy(AgentDescriptor::memorizer(), 0.3),
        AgentDescriptor::llm("mock://heuristic", "mock"),
    );
    let (full, _) = run(cfg.clone());
    let (again, _) = run(cfg.clone());
    assert_eq!(full, again);

    for cut in [1, 57, 200, 250] {
        let mut env = Default::default();
        let mut s = Session::from_config(cfg.clone(), &mut env, Box::new(LogicalClock::default())).unwrap();
        // drop any partial trial so the log ends on a trial boundary
        let mut head = full[..cut].to_vec();
        let last = head.last().unwrap().trial_index;
        if full[cut].trial_index == last {
            head.retain(|r| r.trial_index != last);
        }
        s.resume(&head).unwrap();
        let mut sink = VecSink::default();
        let out = s.run(&mut sink).unwrap();
        assert!(out.completed());
        let mut joined = head.clone();
        joined.extend(sink.records);
        assert_eq!(joined, full, "resume after {cut} records");
    }
}

#[test]
fn jsonl_roundtrip() {
    let cfg = config(5, AgentDescriptor::memorizer(), AgentDescriptor::compositional());
    let mut env = Default::default();
    let mut s = Session::from_config(cfg, &mut env, Box::new(LogicalClock::default())).unwrap();
    let mut sink = JsonlSink::new(Vec::new());
    s.run(&mut sink).unwrap();
    let bytes = sink.into_inner();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert!(text.lines().next().unwrap().contains("\"blockKind\":\"exposure\""));
    let records = read_log(&bytes[..]).unwrap();
    let state = refgame::engine::replay(&records).unwrap();
    assert!(!state.incomplete);
    assert_eq!(&state, s.state());
}

#[test]
fn scripted_capability_error_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("script.jsonl");
    std::fs::write(&path, "{\"error\":\"capability\"}\n").unwrap();
    let cfg = config(
        2,
        AgentDescriptor::llm(format!("mock://script?{}", path.display()), "m"),
        AgentDescriptor::memorizer(),
    );
    let (records, out) = run(cfg);
    assert!(out.aborted.as_deref().unwrap().contains("capability"));
    assert!(out.state.incomplete);
    // exposure needs no model call; the first guessing trial hits the error
    assert!(records.iter().all(|r| r.block_kind == BlockKind::Exposure));
}

#[test]
fn exhausted_script_invalidates_trials_without_aborting() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let cfg = config(
        2,
        AgentDescriptor::llm(format!("mock://script?{}", path.display()), "m"),
        AgentDescriptor::memorizer(),
    );
    let (records, out) = run(cfg);
    assert!(out.completed());
    let comm: Vec<_> = records.iter().filter(|r| r.block_kind == BlockKind::Communication).collect();
    assert!(comm.iter().all(|r| r.success.is_none() && r.error.is_some()));
    assert_eq!(out.state.overall_success(), None);
}
