//! Per-participant message queues shared by the engine thread and the HTTP
//! transports.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use tokio::sync::watch;

use crate::agents::{AgentError, ParticipantChannel};
use crate::protocol::{ClientMessage, ServerBody, ServerMessage};

struct MailState {
    /// Every message sent to the participant; sequence number = index + 1.
    outbound: Vec<ServerMessage>,
    start: Option<usize>,
    instructions: Option<usize>,
    /// Last task not yet answered.
    task: Option<usize>,
    terminal: Option<usize>,
    inbound: VecDeque<ClientMessage>,
    ws_connections: usize,
    last_seen: Instant,
    closed: bool,
}

/// Outbound history plus inbound queue for one participant.
pub struct Mailbox {
    state: Mutex<MailState>,
    inbound_ready: Condvar,
    seq: watch::Sender<u64>,
    halted: Arc<AtomicBool>,
}

impl Mailbox {
    /// `halted` is the server-wide stop flag; once set, engine reads fail.
    pub fn new(halted: Arc<AtomicBool>) -> Arc<Self> {
        Arc::new(Mailbox {
            state: Mutex::new(MailState {
                outbound: Vec::new(),
                start: None,
                instructions: None,
                task: None,
                terminal: None,
                inbound: VecDeque::new(),
                ws_connections: 0,
                last_seen: Instant::now(),
                closed: false,
            }),
            inbound_ready: Condvar::new(),
            seq: watch::channel(0).0,
            halted,
        })
    }

    fn lock(&self) -> MutexGuard<'_, MailState> {
        self.state.lock().expect("mailbox mutex poisoned")
    }

    pub fn push_out(&self, msg: ServerMessage) {
        let seq = {
            let mut st = self.lock();
            let idx = st.outbound.len();
            match &msg.body {
                ServerBody::Start { .. } => st.start = Some(idx),
                ServerBody::Instructions { .. } => st.instructions = Some(idx),
                ServerBody::Task(_) => st.task = Some(idx),
                ServerBody::Finished {} | ServerBody::Aborted { .. } => {
                    st.terminal = Some(idx);
                    st.task = None;
                }
                _ => {}
            }
            st.outbound.push(msg);
            st.outbound.len() as u64
        };
        self.seq.send_replace(seq);
    }

    /// Queues a participant message for the engine.
    pub fn push_in(&self, msg: ClientMessage) {
        let mut st = self.lock();
        st.last_seen = Instant::now();
        if let (Some(t), Some(i)) = (st.task, msg.trial_index) {
            if st.outbound[t].trial_index == Some(i) {
                st.task = None;
            }
        }
        st.inbound.push_back(msg);
        drop(st);
        self.inbound_ready.notify_all();
    }

    /// Messages with sequence number greater than `after`, and the latest
    /// sequence number.
    pub fn since(&self, after: u64) -> (Vec<(u64, ServerMessage)>, u64) {
        let st = self.lock();
        let from = (after as usize).min(st.outbound.len());
        let msgs = st.outbound[from..].iter().cloned().enumerate().map(|(i, m)| ((from + i + 1) as u64, m)).collect();
        (msgs, st.outbound.len() as u64)
    }

    /// What a reconnecting client needs: its seat, the current block
    /// instructions, the pending task and any final message.
    pub fn resume_set(&self) -> (Vec<(u64, ServerMessage)>, u64) {
        let st = self.lock();
        let mut idx: Vec<usize> = [st.start, st.instructions, st.task, st.terminal].into_iter().flatten().collect();
        idx.sort_unstable();
        idx.dedup();
        let msgs = idx.into_iter().map(|i| ((i + 1) as u64, st.outbound[i].clone())).collect();
        (msgs, st.outbound.len() as u64)
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.seq.subscribe()
    }

    pub fn touch(&self) {
        self.lock().last_seen = Instant::now();
    }

    pub fn connect(&self) {
        let mut st = self.lock();
        st.ws_connections += 1;
        st.last_seen = Instant::now();
    }

    pub fn disconnect(&self) {
        let mut st = self.lock();
        st.ws_connections = st.ws_connections.saturating_sub(1);
        st.last_seen = Instant::now();
    }

    /// Whether the participant has been seen within `grace`.
    pub fn is_present(&self, grace: Duration) -> bool {
        let st = self.lock();
        st.ws_connections > 0 || st.last_seen.elapsed() <= grace
    }

    /// Ends the conversation; pending and later engine reads fail.
    pub fn close(&self) {
        self.lock().closed = true;
        self.inbound_ready.notify_all();
    }

    pub fn wake(&self) {
        self.inbound_ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }
}

/// Engine-side view of a mailbox.
pub struct ServerChannel {
    mailbox: Arc<Mailbox>,
    grace: Duration,
}

impl ServerChannel {
    pub fn new(mailbox: Arc<Mailbox>, grace: Duration) -> Self {
        ServerChannel { mailbox, grace }
    }
}

impl ParticipantChannel for ServerChannel {
    fn send(&mut self, msg: ServerMessage) -> Result<(), AgentError> {
        self.mailbox.push_out(msg);
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<ClientMessage>, AgentError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.mailbox.lock();
        loop {
            if self.mailbox.halted.load(Ordering::SeqCst) {
                return Err(AgentError::Aborted("server stopped".into()));
            }
            if let Some(msg) = st.inbound.pop_front() {
                return Ok(Some(msg));
            }
            if st.closed {
                return Err(AgentError::Aborted("session closed".into()));
            }
            if st.ws_connections == 0 && st.last_seen.elapsed() > self.grace {
                return Err(AgentError::Aborted("participant disconnected".into()));
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            let wait = (deadline - now).min(Duration::from_millis(200));
            st = self.mailbox.inbound_ready.wait_timeout(st, wait).expect("mailbox mutex poisoned").0;
        }
    }
}
