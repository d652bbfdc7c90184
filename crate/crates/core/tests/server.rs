use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use refgame::agents::AgentDescriptor;
use refgame::engine::{read_log, replay, Condition};
use refgame::language::Meaning;
use refgame::protocol::{ClientMessage, ServerBody, ServerMessage, TaskPayload};
use refgame::server::{start, ServerConfig};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

const ADMIN: &str = "admin-secret";

fn config(condition: Condition, dir: &Path) -> ServerConfig {
    let mut cfg = ServerConfig::new(condition, dir);
    cfg.partner = AgentDescriptor::memorizer();
    cfg.admin_token = Some(ADMIN.into());
    cfg.seed = 7;
    cfg
}

fn local() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

async fn request(addr: SocketAddr, method: &str, path: &str, body: Option<Value>, admin: bool) -> (u16, Value) {
    let client = reqwest::Client::new();
    let url = format!("http://{addr}{path}");
    let mut req = match method {
        "POST" => client.post(url),
        _ => client.get(url),
    };
    if let Some(b) = body {
        req = req.body(b.to_string());
    }
    if admin {
        req = req.header("authorization", format!("Bearer {ADMIN}"));
    }
    let resp = req.send().await.unwrap();
    let status = resp.status().as_u16();
    let value = resp.json::<Value>().await.unwrap_or(Value::Null);
    (status, value)
}

async fn join(addr: SocketAddr) -> (String, Value) {
    let (status, v) = request(addr, "POST", "/join", None, false).await;
    assert_eq!(status, 200, "{v}");
    (v["token"].as_str().unwrap().to_string(), v)
}

/// A participant who remembers exposed labels and always uses them.
#[derive(Default)]
struct Player {
    vocab: HashMap<Meaning, String>,
    answered: BTreeSet<u32>,
    raw: Vec<String>,
    finished: bool,
    aborted: bool,
}

impl Player {
    fn handle(&mut self, text: &str) -> Option<ClientMessage> {
        self.raw.push(text.to_string());
        let msg: ServerMessage = serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"));
        let i = msg.trial_index.unwrap_or(0);
        let reply = match &msg.body {
            ServerBody::Finished {} => {
                self.finished = true;
                return None;
            }
            ServerBody::Aborted { .. } => {
                self.aborted = true;
                return None;
            }
            ServerBody::Task(TaskPayload::Exposure { stimulus, label }) => {
                self.vocab.insert(*stimulus, label.to_string());
                ClientMessage { kind: "answer".into(), session_id: None, trial_index: Some(i), payload: json!({}) }
            }
            ServerBody::Task(TaskPayload::Guessing { stimulus, labels }) => {
                let want = self.vocab.get(stimulus);
                ClientMessage::answer_choice(i, labels.iter().position(|l| Some(&l.to_string()) == want).unwrap_or(0))
            }
            ServerBody::Task(
                TaskPayload::Labelling { stimulus } | TaskPayload::Speaker { stimulus, .. } | TaskPayload::Testing { stimulus },
            ) => ClientMessage::answer_label(i, self.vocab.get(stimulus).map_or("zzz", String::as_str)),
            ServerBody::Task(TaskPayload::Listener { label, candidates, .. }) => {
                let pick = candidates.iter().position(|m| self.vocab.get(m) == Some(&label.to_string())).unwrap_or(0);
                ClientMessage::answer_choice(i, pick)
            }
            _ => return None,
        };
        self.answered.insert(i);
        Some(reply)
    }
}

/// Plays over a websocket until the session ends or `limit` trials were answered.
async fn play_ws(addr: SocketAddr, token: &str, player: &mut Player, limit: Option<usize>) {
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws?token={token}")).await.unwrap();
    while let Some(frame) = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.expect("server went quiet") {
        let Message::Text(text) = frame.unwrap() else { continue };
        if let Some(reply) = player.handle(text.as_str()) {
            ws.send(Message::Text(serde_json::to_string(&reply).unwrap().into())).await.unwrap();
        }
        if player.finished || player.aborted || limit.is_some_and(|n| player.answered.len() >= n) {
            break;
        }
    }
    let _ = ws.close(None).await;
}

async fn play_poll(addr: SocketAddr, token: &str, player: &mut Player) {
    let mut after: Option<u64> = None;
    while !player.finished && !player.aborted {
        let q = after.map_or(String::new(), |a| format!("&after={a}"));
        let (status, v) = request(addr, "GET", &format!("/poll?token={token}&waitMs=2000{q}"), None, false).await;
        assert_eq!(status, 200);
        after = Some(v["next"].as_u64().unwrap());
        for m in v["messages"].as_array().unwrap() {
            if let Some(reply) = player.handle(&m["message"].to_string()) {
                let (s, _) =
                    request(addr, "POST", &format!("/answer?token={token}"), Some(serde_json::to_value(&reply).unwrap()), false)
                        .await;
                assert_eq!(s, 202);
            }
        }
    }
}

fn session_log(dir: &Path, id: &str) -> Vec<refgame::engine::EventRecord> {
    read_log(BufReader::new(File::open(dir.join(format!("{id}.jsonl"))).unwrap())).unwrap()
}

/// Nothing a participant sees may name the condition or the partner type,
/// and listener tasks never carry the target.
fn assert_hygienic(raw: &[String]) {
    fn walk(v: &Value, listener: bool) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    assert!(!["condition", "partner", "agentKind", "target"].contains(&k.as_str()), "leaked key {k}");
                    if listener {
                        assert_ne!(k, "intended");
                    }
                    walk(v, listener);
                }
            }
            Value::Array(items) => items.iter().for_each(|i| walk(i, listener)),
            Value::String(s) => {
                let lower = s.to_ascii_lowercase();
                for word in ["llm", "oracle", "memorizer", "human-llm", "human-human", "language model", "bot"] {
                    assert!(!lower.contains(word), "leaked {word:?} in {s:?}");
                }
                assert!(!["hh", "hl", "ll"].contains(&lower.as_str()), "leaked condition {s}");
            }
            _ => {}
        }
    }
    for text in raw {
        let v: Value = serde_json::from_str(text).unwrap();
        let listener = v["payload"]["kind"] == "listener";
        walk(&v, listener);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn human_llm_session_over_websocket() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(config(Condition::Hl, dir.path()), local()).await.unwrap();
    let addr = server.addr();

    let (status, health) = request(addr, "GET", "/healthz", None, false).await;
    assert_eq!((status, health["status"].as_str()), (200, Some("ok")));

    let (token, joined) = join(addr).await;
    assert_eq!(token.len(), 32);
    assert_eq!(joined["status"], "active");
    let session_id = joined["sessionId"].as_str().unwrap().to_string();

    let (status, _) = request(addr, "GET", "/state?token=nope", None, false).await;
    assert_eq!(status, 404);
    assert!(tokio_tungstenite::connect_async(format!("ws://{addr}/ws?token=nope")).await.is_err());

    let mut player = Player::default();
    play_ws(addr, &token, &mut player, None).await;
    assert!(player.finished, "session did not finish");
    assert_eq!(player.answered.len(), 222);
    assert_hygienic(&player.raw);

    tokio::time::sleep(Duration::from_millis(200)).await;
    let (_, st) = request(addr, "GET", &format!("/state?token={token}"), None, false).await;
    assert_eq!(st["status"], "finished");
    assert_eq!(st["trialIndex"], 222);
    assert!(st.get("condition").is_none());

    let (status, _) = request(addr, "GET", "/sessions", None, false).await;
    assert_eq!(status, 401);
    let (status, listing) = request(addr, "GET", "/sessions", None, true).await;
    assert_eq!(status, 200);
    let entry = &listing["sessions"][0];
    assert_eq!(entry["sessionId"], session_id.as_str());
    assert_eq!(entry["condition"], "hl");
    assert_eq!(entry["status"], "finished");

    let records = session_log(dir.path(), &session_id);
    assert_eq!(records.len(), 324);
    let state = replay(&records).unwrap();
    assert_eq!(state.next_trial, 222);
    assert_eq!(state.overall_success(), Some(1.0));
    assert!(records.iter().all(|r| r.latency_ms.is_some()));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn human_human_pairing_with_websocket_and_long_poll() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(config(Condition::Hh, dir.path()), local()).await.unwrap();
    let addr = server.addr();

    let (first, j1) = join(addr).await;
    assert_eq!(j1["status"], "waiting");
    let (_, st) = request(addr, "GET", &format!("/state?token={first}"), None, false).await;
    assert_eq!(st["status"], "waiting");

    let (status, _) = request(addr, "POST", "/join", Some(json!({ "token": first })), false).await;
    assert_eq!(status, 409, "duplicate token must be rejected");
    let (status, _) = request(addr, "POST", "/join", Some(json!({ "token": "short" })), false).await;
    assert_eq!(status, 400);

    let (second, j2) = join(addr).await;
    assert_eq!(j2["status"], "active");
    let sid = j2["sessionId"].as_str().unwrap().to_string();
    let (_, st) = request(addr, "GET", &format!("/state?token={first}"), None, false).await;
    assert_eq!(st["sessionId"], sid.as_str());
    assert_eq!(st["seat"], "A");

    let mut a = Player::default();
    let mut b = Player::default();
    tokio::join!(play_ws(addr, &first, &mut a, None), play_poll(addr, &second, &mut b));
    assert!(a.finished && b.finished);
    assert_hygienic(&a.raw);
    assert_hygienic(&b.raw);

    let records = session_log(dir.path(), &sid);
    assert_eq!(records.len(), 324);
    assert!(records.iter().all(|r| r.condition == Condition::Hh));
    assert_eq!(replay(&records).unwrap().overall_success(), Some(1.0));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn unfinished_session_resumes_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(config(Condition::Hl, dir.path()), local()).await.unwrap();
    let addr = server.addr();
    let (token, joined) = join(addr).await;
    let sid = joined["sessionId"].as_str().unwrap().to_string();
    let mut player = Player::default();
    play_ws(addr, &token, &mut player, Some(70)).await;
    assert!(!player.finished);
    server.shutdown().await.unwrap();

    let before = session_log(dir.path(), &sid);
    assert!(before.len() >= 2 * 60, "exposure should be logged, got {}", before.len());
    assert!(before.len() < 324);

    let server = start(config(Condition::Hl, dir.path()), local()).await.unwrap();
    assert_eq!(server.resumed(), 1);
    let addr = server.addr();
    let (_, st) = request(addr, "GET", &format!("/state?token={token}"), None, false).await;
    assert_eq!(st["status"], "active");
    assert_eq!(st["sessionId"], sid.as_str());
    play_ws(addr, &token, &mut player, None).await;
    assert!(player.finished);

    let records = session_log(dir.path(), &sid);
    assert_eq!(records.len(), 324);
    let keys: BTreeSet<_> = records.iter().map(|r| (r.trial_index, r.agent_id.clone())).collect();
    assert_eq!(keys.len(), 324, "no trial may be logged twice");
    assert_eq!(&records[..before.len()], &before[..]);
    assert_eq!(replay(&records).unwrap().overall_success(), Some(1.0));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn disconnected_participant_aborts_after_grace() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Condition::Hl, dir.path());
    cfg.grace = Duration::from_millis(300);
    let server = start(cfg, local()).await.unwrap();
    let addr = server.addr();
    let (token, joined) = join(addr).await;
    let sid = joined["sessionId"].as_str().unwrap().to_string();
    let mut player = Player::default();
    play_ws(addr, &token, &mut player, Some(5)).await;

    let mut status = Value::Null;
    for _ in 0..50 {
        tokio::time::sleep(Duration::from_millis(100)).await;
        let (_, listing) = request(addr, "GET", "/sessions", None, true).await;
        status = listing["sessions"][0]["status"].clone();
        if status == "aborted" {
            break;
        }
    }
    assert_eq!(status, "aborted");
    let sidecar: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join(format!("{sid}.session.json"))).unwrap()).unwrap();
    assert_eq!(sidecar["status"], "aborted");
    server.shutdown().await.unwrap();

    // an aborted session is not resumed
    let server = start(config(Condition::Hl, dir.path()), local()).await.unwrap();
    assert_eq!(server.resumed(), 0);
    server.shutdown().await.unwrap();
}
