//! Participant-facing session server.
//!
//! Routes:
//! - `POST /join` issues a participant token and pairs participants.
//! - `GET /state?token=` reports progress.
//! - `GET /ws?token=[&after=]` streams protocol messages and accepts answers.
//! - `GET /poll?token=[&after=&waitMs=]` and `POST /answer?token=` are the
//!   long-poll fallback.
//! - `GET /healthz` is a liveness probe.
//! - `GET /sessions` lists sessions for holders of the admin token.
//!
//! Each session runs on its own engine thread and appends to
//! `<logDir>/<sessionId>.jsonl`. A `<sessionId>.session.json` sidecar records
//! the config and seat tokens so that unfinished sessions resume after a
//! restart.

mod mailbox;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::{oneshot, watch};

pub use mailbox::{Mailbox, ServerChannel};

use crate::agents::{AgentDescriptor, AgentEnv, ParticipantChannel, TokenBucket};
use crate::engine::{
    read_log_lenient, replay, Condition, EngineError, EventRecord, EventSink, JsonlSink, Session, SessionConfig,
    SessionState, Slot, SystemClock,
};
use crate::protocol::{ClientMessage, ServerBody, ServerMessage, PROTOCOL_VERSION};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("invalid server config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// `hh` pairs participants with each other, `hl` with `partner`.
    pub condition: Condition,
    pub partner: AgentDescriptor,
    pub log_dir: PathBuf,
    /// Enables `GET /sessions` for requests bearing this token.
    pub admin_token: Option<String>,
    /// Files served for unmatched GET paths.
    pub static_dir: Option<PathBuf>,
    /// How long a disconnected participant may take to come back.
    pub grace: Duration,
    pub seed: u64,
    pub rounds: u32,
    pub distractors: usize,
    pub human_timeout_ms: u64,
    pub max_duration_ms: Option<u64>,
    pub api_key: Option<String>,
    /// Model requests per second across all sessions.
    pub rate_limit: Option<f64>,
}

impl ServerConfig {
    pub fn new(condition: Condition, log_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            condition,
            partner: AgentDescriptor::llm("mock://heuristic", "heuristic"),
            log_dir: log_dir.into(),
            admin_token: None,
            static_dir: None,
            grace: Duration::from_secs(60),
            seed: 0,
            rounds: 4,
            distractors: 3,
            human_timeout_ms: 120_000,
            max_duration_ms: Some(70 * 60 * 1000),
            api_key: None,
            rate_limit: None,
        }
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        let bad = |m: &str| Err(ServerError::Config(m.to_string()));
        match self.condition {
            Condition::Hh => {}
            Condition::Hl if self.partner.is_human() => return bad("the hl partner must not be human"),
            Condition::Hl => {
                self.partner.validate().map_err(|e| ServerError::Config(format!("partner: {e}")))?;
            }
            Condition::Ll => return bad("the server hosts hh or hl sessions; use simulate for ll"),
        }
        if self.admin_token.as_deref().is_some_and(str::is_empty) {
            return bad("admin token is empty");
        }
        if self.human_timeout_ms == 0 {
            return bad("human timeout must be positive");
        }
        self.template("check".into(), &[Slot::A]).validate()?;
        Ok(())
    }

    fn template(&self, session_id: String, humans: &[Slot]) -> SessionConfig {
        let human = AgentDescriptor::HumanProxy { timeout_ms: self.human_timeout_ms };
        let desc = |s: Slot| if humans.contains(&s) { human.clone() } else { self.partner.clone() };
        let seed = derive_seed(self.seed, &session_id);
        let mut c = SessionConfig::new(session_id, self.condition, seed, desc(Slot::A), desc(Slot::B));
        c.rounds = self.rounds;
        c.distractor_count = self.distractors;
        c.max_duration_ms = self.max_duration_ms;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Waiting,
    Active,
    Finished,
    Aborted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SeatToken {
    slot: Slot,
    token: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Sidecar {
    config: SessionConfig,
    participants: Vec<SeatToken>,
    #[serde(default)]
    status: Option<SessionStatus>,
    #[serde(default)]
    reason: Option<String>,
}

struct Participant {
    mailbox: Arc<Mailbox>,
    session: Option<String>,
    slot: Option<Slot>,
}

struct LiveSession {
    config: SessionConfig,
    participants: Vec<SeatToken>,
    status: SessionStatus,
    reason: Option<String>,
    state: Arc<Mutex<SessionState>>,
}

#[derive(Default)]
struct Registry {
    participants: HashMap<String, Participant>,
    waiting: Option<String>,
    sessions: BTreeMap<String, LiveSession>,
}

struct Shared {
    cfg: ServerConfig,
    reg: Mutex<Registry>,
    halted: Arc<AtomicBool>,
    engines: Mutex<Vec<JoinHandle<()>>>,
    limiter: Option<Arc<TokenBucket>>,
    shutdown: watch::Sender<bool>,
}

impl Shared {
    fn reg(&self) -> MutexGuard<'_, Registry> {
        self.reg.lock().expect("registry mutex poisoned")
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.cfg.log_dir.join(format!("{id}.jsonl"))
    }

    fn sidecar_path(&self, id: &str) -> PathBuf {
        self.cfg.log_dir.join(format!("{id}.session.json"))
    }

    fn mailbox(&self, token: &str) -> Option<Arc<Mailbox>> {
        self.reg().participants.get(token).map(|p| p.mailbox.clone())
    }
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rngs::OsRng.fill_bytes(&mut buf);
    buf.iter().map(|b| format!("{b:02x}")).collect()
}

fn is_token(s: &str) -> bool {
    s.len() == 32 && s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(sidecar)?)?;
    fs::rename(tmp, path)
}

/// Appends to the session log and mirrors progress for `/state`.
struct LiveSink {
    log: JsonlSink<File>,
    state: Arc<Mutex<SessionState>>,
}

impl EventSink for LiveSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        self.log.append(record)?;
        if let Err(e) = self.state.lock().expect("state mutex poisoned").apply(record) {
            log::warn!("state update failed: {e}");
        }
        Ok(())
    }
}

fn start_message(session_id: &str, slot: Slot) -> ServerMessage {
    ServerMessage {
        session_id: session_id.to_string(),
        trial_index: None,
        body: ServerBody::Start { role: slot.id().to_string(), version: PROTOCOL_VERSION },
    }
}

/// Creates a session for the given seats and starts its engine.
fn create_session(shared: &Arc<Shared>, reg: &mut Registry, seats: Vec<SeatToken>) -> Result<String, ServerError> {
    let id = format!("s{}", random_hex(8));
    let humans: Vec<Slot> = seats.iter().map(|s| s.slot).collect();
    let config = shared.cfg.template(id.clone(), &humans);
    write_sidecar(
        &shared.sidecar_path(&id),
        &Sidecar { config: config.clone(), participants: seats.clone(), status: None, reason: None },
    )?;
    launch(shared, reg, config, seats, Vec::new());
    Ok(id)
}

/// Registers a session and spawns its engine thread, resuming from `records`.
fn launch(shared: &Arc<Shared>, reg: &mut Registry, config: SessionConfig, seats: Vec<SeatToken>, records: Vec<EventRecord>) {
    let id = config.session_id.clone();
    let mut mailboxes = Vec::new();
    for seat in &seats {
        let p = reg
            .participants
            .entry(seat.token.clone())
            .or_insert_with(|| Participant { mailbox: Mailbox::new(shared.halted.clone()), session: None, slot: None });
        p.session = Some(id.clone());
        p.slot = Some(seat.slot);
        p.mailbox.push_out(start_message(&id, seat.slot));
        mailboxes.push((seat.slot, p.mailbox.clone()));
    }
    mailboxes.sort_by_key(|(s, _)| *s);
    let state = Arc::new(Mutex::new(SessionState::new(id.clone(), config.condition, config.task_count())));
    reg.sessions.insert(
        id.clone(),
        LiveSession { config: config.clone(), participants: seats, status: SessionStatus::Active, reason: None, state: state.clone() },
    );
    let shared2 = shared.clone();
    let handle = std::thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || run_engine(shared2, config, mailboxes, records, state))
        .expect("failed to spawn session thread");
    shared.engines.lock().expect("engine list poisoned").push(handle);
}

fn run_engine(
    shared: Arc<Shared>,
    config: SessionConfig,
    mailboxes: Vec<(Slot, Arc<Mailbox>)>,
    records: Vec<EventRecord>,
    state: Arc<Mutex<SessionState>>,
) {
    let id = config.session_id.clone();
    let result = (|| -> Result<_, EngineError> {
        let mut env = AgentEnv {
            limiter: shared.limiter.clone(),
            api_key: shared.cfg.api_key.clone(),
            channels: mailboxes
                .iter()
                .map(|(_, m)| Box::new(ServerChannel::new(m.clone(), shared.cfg.grace)) as Box<dyn ParticipantChannel>)
                .collect(),
        };
        let mut session = Session::from_config(config.clone(), &mut env, Box::new(SystemClock))?;
        if !records.is_empty() {
            session.resume(&records)?;
        }
        *state.lock().expect("state mutex poisoned") = session.state().clone();
        let file = OpenOptions::new().create(true).append(true).open(shared.log_path(&id))?;
        let mut sink = LiveSink { log: JsonlSink::new(file), state: state.clone() };
        session.run(&mut sink)
    })();
    if shared.halted.load(Ordering::SeqCst) {
        log::info!("session {id} left resumable at shutdown");
        return;
    }
    let (status, reason) = match result {
        Ok(outcome) if outcome.completed() => (SessionStatus::Finished, None),
        Ok(outcome) => (SessionStatus::Aborted, outcome.aborted),
        Err(e) => {
            log::error!("session {id} failed: {e}");
            for (_, mb) in &mailboxes {
                mb.push_out(ServerMessage {
                    session_id: id.clone(),
                    trial_index: None,
                    body: ServerBody::Aborted { reason: "the session ended unexpectedly".into() },
                });
            }
            (SessionStatus::Aborted, Some(e.to_string()))
        }
    };
    for (_, mb) in &mailboxes {
        mb.close();
    }
    let mut reg = shared.reg();
    if let Some(live) = reg.sessions.get_mut(&id) {
        live.status = status;
        live.reason = reason.clone();
        let sidecar =
            Sidecar { config: live.config.clone(), participants: live.participants.clone(), status: Some(status), reason };
        if let Err(e) = write_sidecar(&shared.sidecar_path(&id), &sidecar) {
            log::error!("could not update sidecar of {id}: {e}");
        }
    }
}

/// Loads sidecars from the log directory, resuming unfinished sessions.
fn recover(shared: &Arc<Shared>) -> Result<usize, ServerError> {
    let mut resumed = 0;
    let mut paths: Vec<PathBuf> = fs::read_dir(&shared.cfg.log_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".session.json"))
        .collect();
    paths.sort();
    let mut reg = shared.reg();
    for path in paths {
        let sidecar: Sidecar = match fs::read(&path).map_err(|e| e.to_string()).and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string())) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                continue;
            }
        };
        let id = sidecar.config.session_id.clone();
        let log_path = shared.log_path(&id);
        let records = match File::open(&log_path) {
            Ok(f) => {
                let report = read_log_lenient(BufReader::new(f))?;
                if !report.warnings.is_empty() {
                    // drop a torn final line so appends start on a fresh line
                    let mut sink = JsonlSink::new(File::create(&log_path)?);
                    for r in &report.records {
                        sink.append(r)?;
                    }
                }
                report.records
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        match sidecar.status {
            None => {
                log::info!("resuming session {id} at record {}", records.len());
                launch(shared, &mut reg, sidecar.config, sidecar.participants, records);
                resumed += 1;
            }
            Some(status) => {
                let state = replay(&records).unwrap_or_else(|_| {
                    SessionState::new(id.clone(), sidecar.config.condition, sidecar.config.task_count())
                });
                for seat in &sidecar.participants {
                    let mailbox = Mailbox::new(shared.halted.clone());
                    mailbox.close();
                    reg.participants
                        .insert(seat.token.clone(), Participant { mailbox, session: Some(id.clone()), slot: Some(seat.slot) });
                }
                reg.sessions.insert(
                    id,
                    LiveSession {
                        config: sidecar.config,
                        participants: sidecar.participants,
                        status,
                        reason: sidecar.reason,
                        state: Arc::new(Mutex::new(state)),
                    },
                );
            }
        }
    }
    Ok(resumed)
}

type AppState = Arc<Shared>;

fn error(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

#[derive(Debug, Default, Deserialize)]
struct JoinRequest {
    #[serde(default)]
    token: Option<String>,
}

async fn join(State(shared): State<AppState>, body: Bytes) -> Response {
    let req: JoinRequest = if body.iter().all(u8::is_ascii_whitespace) {
        JoinRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, &format!("malformed join request: {e}")),
        }
    };
    let mut reg = shared.reg();
    let token = match req.token {
        Some(t) if !is_token(&t) => return error(StatusCode::BAD_REQUEST, "token must be 32 lowercase hex digits"),
        Some(t) if reg.participants.contains_key(&t) => return error(StatusCode::CONFLICT, "token already in use"),
        Some(t) => t,
        None => random_hex(16),
    };
    let mailbox = Mailbox::new(shared.halted.clone());
    reg.participants.insert(token.clone(), Participant { mailbox: mailbox.clone(), session: None, slot: None });
    let grace = shared.cfg.grace;
    let seats = match shared.cfg.condition {
        Condition::Hh => {
            let partner = reg.waiting.take().filter(|w| reg.participants.get(w).is_some_and(|p| p.mailbox.is_present(grace)));
            match partner {
                Some(w) => Some(vec![SeatToken { slot: Slot::A, token: w }, SeatToken { slot: Slot::B, token: token.clone() }]),
                None => {
                    reg.waiting = Some(token.clone());
                    None
                }
            }
        }
        _ => Some(vec![SeatToken { slot: Slot::A, token: token.clone() }]),
    };
    let session_id = match seats {
        Some(seats) => match create_session(&shared, &mut reg, seats) {
            Ok(id) => Some(id),
            Err(e) => {
                log::error!("could not create session: {e}");
                reg.participants.remove(&token);
                return error(StatusCode::INTERNAL_SERVER_ERROR, "could not create a session");
            }
        },
        None => {
            mailbox.push_out(ServerMessage { session_id: String::new(), trial_index: None, body: ServerBody::Waiting {} });
            None
        }
    };
    let status = if session_id.is_some() { SessionStatus::Active } else { SessionStatus::Waiting };
    (StatusCode::OK, Json(json!({ "token": token, "status": status, "sessionId": session_id }))).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TokenQuery {
    token: String,
    after: Option<u64>,
    wait_ms: Option<u64>,
}

async fn state(State(shared): State<AppState>, Query(q): Query<TokenQuery>) -> Response {
    let reg = shared.reg();
    let Some(p) = reg.participants.get(&q.token) else { return error(StatusCode::NOT_FOUND, "unknown token") };
    let (_, last_seq) = p.mailbox.since(u64::MAX);
    let live = p.session.as_ref().and_then(|id| reg.sessions.get(id));
    let body = match live {
        None => json!({ "status": SessionStatus::Waiting, "sessionId": null, "seat": null, "lastSeq": last_seq }),
        Some(live) => {
            let st = live.state.lock().expect("state mutex poisoned");
            json!({
                "status": live.status,
                "sessionId": live.config.session_id,
                "seat": p.slot.map(Slot::id),
                "trialIndex": st.next_trial,
                "taskCount": st.task_count,
                "lastSeq": last_seq,
            })
        }
    };
    Json(body).into_response()
}

async fn ws(ws: WebSocketUpgrade, State(shared): State<AppState>, Query(q): Query<TokenQuery>) -> Response {
    let Some(mailbox) = shared.mailbox(&q.token) else { return error(StatusCode::UNAUTHORIZED, "unknown token") };
    let shutdown = shared.shutdown.subscribe();
    ws.on_upgrade(move |socket| ws_loop(socket, mailbox, q.after, shutdown))
}

fn encode(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize").into())
}

async fn ws_loop(mut socket: WebSocket, mailbox: Arc<Mailbox>, after: Option<u64>, mut shutdown: watch::Receiver<bool>) {
    mailbox.connect();
    let mut rx = mailbox.subscribe();
    rx.borrow_and_update();
    let (initial, mut cursor) = match after {
        Some(a) => mailbox.since(a),
        None => mailbox.resume_set(),
    };
    let mut ok = true;
    for (_, m) in &initial {
        if socket.send(encode(m)).await.is_err() {
            ok = false;
            break;
        }
    }
    while ok {
        rx.borrow_and_update();
        let (msgs, last) = mailbox.since(cursor);
        cursor = last;
        for (_, m) in &msgs {
            if socket.send(encode(m)).await.is_err() {
                ok = false;
            }
        }
        if !ok {
            break;
        }
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                    Ok(msg) => mailbox.push_in(msg),
                    Err(e) => {
                        let reply = ServerMessage {
                            session_id: String::new(),
                            trial_index: None,
                            body: ServerBody::Error { message: format!("malformed message: {e}") },
                        };
                        ok = socket.send(encode(&reply)).await.is_ok();
                    }
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => mailbox.touch(),
            },
            changed = rx.changed() => if changed.is_err() { break },
            _ = shutdown.changed() => break,
        }
    }
    mailbox.disconnect();
    mailbox.wake();
}

async fn poll(State(shared): State<AppState>, Query(q): Query<TokenQuery>) -> Response {
    let Some(mailbox) = shared.mailbox(&q.token) else { return error(StatusCode::NOT_FOUND, "unknown token") };
    mailbox.touch();
    let wait = Duration::from_millis(q.wait_ms.unwrap_or(25_000).min(30_000));
    let deadline = tokio::time::Instant::now() + wait;
    let mut rx = mailbox.subscribe();
    let (msgs, next) = loop {
        rx.borrow_and_update();
        let (msgs, next) = match q.after {
            Some(a) => mailbox.since(a),
            None => mailbox.resume_set(),
        };
        if !msgs.is_empty() {
            break (msgs, next);
        }
        match tokio::time::timeout_at(deadline, rx.changed()).await {
            Ok(Ok(())) => continue,
            _ => break (msgs, next),
        }
    };
    mailbox.touch();
    let messages: Vec<_> = msgs.into_iter().map(|(seq, m)| json!({ "seq": seq, "message": m })).collect();
    Json(json!({ "messages": messages, "next": next })).into_response()
}

async fn answer(State(shared): State<AppState>, Query(q): Query<TokenQuery>, body: Bytes) -> Response {
    let Some(mailbox) = shared.mailbox(&q.token) else { return error(StatusCode::NOT_FOUND, "unknown token") };
    match serde_json::from_slice::<ClientMessage>(&body) {
        Ok(msg) => {
            mailbox.push_in(msg);
            (StatusCode::ACCEPTED, Json(json!({ "accepted": true }))).into_response()
        }
        Err(e) => error(StatusCode::BAD_REQUEST, &format!("malformed message: {e}")),
    }
}

async fn healthz() -> Response {
    Json(json!({ "status": "ok", "version": PROTOCOL_VERSION })).into_response()
}

/// The rejection response, if the request may not use admin routes.
fn admin_denied(shared: &Shared, headers: &HeaderMap) -> Option<Response> {
    let Some(expected) = shared.cfg.admin_token.as_deref() else {
        return Some(error(StatusCode::NOT_FOUND, "admin interface disabled"));
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .or_else(|| headers.get("x-admin-token").and_then(|v| v.to_str().ok()));
    match given {
        Some(g) if g == expected => None,
        _ => Some(error(StatusCode::UNAUTHORIZED, "admin token required")),
    }
}

async fn sessions(State(shared): State<AppState>, headers: HeaderMap) -> Response {
    if let Some(r) = admin_denied(&shared, &headers) {
        return r;
    }
    let reg = shared.reg();
    let list: Vec<_> = reg
        .sessions
        .values()
        .map(|live| {
            let st = live.state.lock().expect("state mutex poisoned");
            json!({
                "sessionId": live.config.session_id,
                "condition": live.config.condition,
                "status": live.status,
                "reason": live.reason,
                "nextTrial": st.next_trial,
                "taskCount": st.task_count,
                "records": st.records,
                "errors": st.errors,
                "success": st.overall_success(),
                "humans": live.participants.len(),
            })
        })
        .collect();
    Json(json!({ "sessions": list, "waiting": reg.waiting.is_some() as u32 })).into_response()
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(shared): State<AppState>, uri: Uri) -> Response {
    let Some(root) = shared.cfg.static_dir.as_ref() else { return error(StatusCode::NOT_FOUND, "not found") };
    let rel = uri.path().trim_start_matches('/');
    if rel.split('/').any(|seg| seg == ".." || seg.starts_with('.')) {
        return error(StatusCode::NOT_FOUND, "not found");
    }
    let mut path = root.join(rel);
    if rel.is_empty() || path.is_dir() {
        path = path.join("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "not found"),
    }
}

fn router(shared: AppState) -> Router {
    Router::new()
        .route("/join", post(join))
        .route("/state", get(state))
        .route("/ws", get(ws))
        .route("/poll", get(poll))
        .route("/answer", post(answer))
        .route("/healthz", get(healthz))
        .route("/sessions", get(sessions))
        .fallback(get(static_file))
        .with_state(shared)
}

/// A server bound to a socket.
pub struct RunningServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: oneshot::Sender<()>,
    task: tokio::task::JoinHandle<io::Result<()>>,
    resumed: usize,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Sessions picked up from the log directory at startup.
    pub fn resumed(&self) -> usize {
        self.resumed
    }

    /// Stops accepting requests and halts engine threads. Unfinished sessions
    /// stay resumable from the log directory.
    pub async fn shutdown(self) -> io::Result<()> {
        self.shared.halted.store(true, Ordering::SeqCst);
        self.shared.shutdown.send_replace(true);
        for p in self.shared.reg().participants.values() {
            p.mailbox.wake();
        }
        let _ = self.stop.send(());
        let served = self.task.await.map_err(io::Error::other)?;
        let handles: Vec<_> = std::mem::take(&mut *self.shared.engines.lock().expect("engine list poisoned"));
        tokio::task::spawn_blocking(move || {
            for h in handles {
                let _ = h.join();
            }
        })
        .await
        .map_err(io::Error::other)?;
        served
    }
}

/// Binds `addr`, resumes unfinished sessions and starts serving.
pub async fn start(cfg: ServerConfig, addr: SocketAddr) -> Result<RunningServer, ServerError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.log_dir)?;
    let limiter = cfg.rate_limit.map(|r| Arc::new(TokenBucket::new(r, r.max(1.0))));
    let shared = Arc::new(Shared {
        cfg,
        reg: Mutex::new(Registry::default()),
        halted: Arc::new(AtomicBool::new(false)),
        engines: Mutex::new(Vec::new()),
        limiter,
        shutdown: watch::channel(false).0,
    });
    let resumed = recover(&shared)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(shared.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    log::info!("listening on {addr}");
    Ok(RunningServer { addr, shared, stop, task, resumed })
}

/// Runs until interrupted.
pub fn serve(cfg: ServerConfig, addr: SocketAddr) -> Result<(), ServerError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let server = start(cfg, addr).await?;
        eprintln!("listening on http://{}", server.addr());
        tokio::signal::ctrl_c().await?;
        server.shutdown().await?;
        Ok(())
    })
}
