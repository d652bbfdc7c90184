//! Referential-game experiments between language-model agents and people:
//! artificial languages, the session engine, structure metrics and the
//! statistics used to analyse them.

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod engine;
pub mod language;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod server;
pub mod stats;
