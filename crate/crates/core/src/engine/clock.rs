use std::time::{SystemTime, UNIX_EPOCH};

/// Source of event timestamps.
pub trait Clock: Send {
    fn now_ms(&mut self) -> u64;
    /// Whether latencies derived from this clock mean anything.
    fn measures_latency(&self) -> bool;
    /// Called when a session resumes after a record stamped `last`.
    fn resume_after(&mut self, _last: u64) {}
}

/// Wall-clock milliseconds since the Unix epoch.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&mut self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }

    fn measures_latency(&self) -> bool {
        true
    }
}

/// A counter that ticks once per reading; keeps simulated logs reproducible.
#[derive(Debug, Default, Clone, Copy)]
pub struct LogicalClock {
    tick: u64,
}

impl Clock for LogicalClock {
    fn now_ms(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    fn resume_after(&mut self, last: u64) {
        self.tick = self.tick.max(last);
    }

    fn measures_latency(&self) -> bool {
        false
    }
}
