use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::client::{CompletionClient, HttpClient, HttpClientConfig, ScoreNorm, TokenBucket, API_KEY_ENV};
use super::human::{HumanProxy, ParticipantChannel};
use super::llm::LlmAgent;
use super::mock::{HeuristicClient, ScriptedClient};
use super::oracle::{CharTable, CompositionalBot, MemorizerBot, NoisyBot};
use super::{Agent, AgentError};
use crate::language::Attribute;
use crate::rng::derive_seed;

fn default_llm_timeout() -> u64 {
    60_000
}
fn default_human_timeout() -> u64 {
    120_000
}
fn default_order() -> [Attribute; 3] {
    Attribute::ALL
}

/// Serializable description of an agent, as stored in session configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AgentDescriptor {
    /// Endpoints starting with `mock://heuristic` or `mock://script?<path>`
    /// select offline clients.
    #[serde(rename_all = "camelCase")]
    Llm {
        endpoint: String,
        model: String,
        #[serde(default)]
        temperature: f64,
        #[serde(default)]
        score_norm: ScoreNorm,
        #[serde(default = "default_llm_timeout")]
        timeout_ms: u64,
        #[serde(default)]
        chat: bool,
    },
    OracleCompositional {
        #[serde(default = "default_order")]
        order: [Attribute; 3],
        #[serde(default)]
        table: CharTable,
    },
    OracleMemorizer,
    OracleNoisy {
        base: Box<AgentDescriptor>,
        epsilon: f64,
    },
    #[serde(rename_all = "camelCase")]
    HumanProxy {
        #[serde(default = "default_human_timeout")]
        timeout_ms: u64,
    },
}

impl AgentDescriptor {
    pub fn memorizer() -> Self {
        AgentDescriptor::OracleMemorizer
    }

    pub fn compositional() -> Self {
        AgentDescriptor::OracleCompositional { order: Attribute::ALL, table: CharTable::default() }
    }

    pub fn noisy(base: AgentDescriptor, epsilon: f64) -> Self {
        AgentDescriptor::OracleNoisy { base: Box::new(base), epsilon }
    }

    /// Agent that answers uniformly at random.
    pub fn chance() -> Self {
        Self::noisy(Self::memorizer(), 1.0)
    }

    pub fn llm(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        AgentDescriptor::Llm {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            score_norm: ScoreNorm::PerToken,
            timeout_ms: default_llm_timeout(),
            chat: false,
        }
    }

    pub fn human() -> Self {
        AgentDescriptor::HumanProxy { timeout_ms: default_human_timeout() }
    }

    pub fn is_human(&self) -> bool {
        matches!(self, AgentDescriptor::HumanProxy { .. })
    }

    /// Short type name for logs and summaries.
    pub fn kind_name(&self) -> &'static str {
        match self {
            AgentDescriptor::Llm { .. } => "llm",
            AgentDescriptor::OracleCompositional { .. } => "oracle-compositional",
            AgentDescriptor::OracleMemorizer => "oracle-memorizer",
            AgentDescriptor::OracleNoisy { .. } => "oracle-noisy",
            AgentDescriptor::HumanProxy { .. } => "human-proxy",
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            AgentDescriptor::Llm { endpoint, model, temperature, timeout_ms, .. } => {
                if endpoint.is_empty() || model.is_empty() {
                    return Err(AgentError::InvalidArgument("llm agent needs an endpoint and a model".into()));
                }
                if *temperature != 0.0 {
                    return Err(AgentError::InvalidArgument("only greedy decoding (temperature 0) is supported".into()));
                }
                if *timeout_ms == 0 {
                    return Err(AgentError::InvalidArgument("timeoutMs must be positive".into()));
                }
                Ok(())
            }
            AgentDescriptor::OracleCompositional { order, table } => {
                let mut sorted = *order;
                sorted.sort();
                if sorted != Attribute::ALL {
                    return Err(AgentError::InvalidArgument("order must list each attribute once".into()));
                }
                let segs: Vec<&String> = table.0.iter().flatten().collect();
                if segs.iter().any(|s| crate::language::Label::sanitize(s).as_ref().map(|l| l.as_str()) != Some(s.as_str())) {
                    return Err(AgentError::InvalidArgument("table segments must be non-empty lowercase alphanumerics".into()));
                }
                Ok(())
            }
            AgentDescriptor::OracleMemorizer => Ok(()),
            AgentDescriptor::OracleNoisy { base, epsilon } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(AgentError::InvalidArgument(format!("epsilon {epsilon} not in [0, 1]")));
                }
                if base.is_human() {
                    return Err(AgentError::InvalidArgument("noise cannot wrap a human".into()));
                }
                base.validate()
            }
            AgentDescriptor::HumanProxy { timeout_ms } => {
                if *timeout_ms == 0 {
                    return Err(AgentError::InvalidArgument("timeoutMs must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// Process-level resources agents are built from.
#[derive(Default)]
pub struct AgentEnv {
    pub limiter: Option<Arc<TokenBucket>>,
    /// Overrides the API key environment variable.
    pub api_key: Option<String>,
    /// Transports for human participants, consumed in seat order.
    pub channels: std::collections::VecDeque<Box<dyn ParticipantChannel>>,
}

impl ParticipantChannel for Box<dyn ParticipantChannel> {
    fn send(&mut self, msg: crate::protocol::ServerMessage) -> Result<(), AgentError> {
        (**self).send(msg)
    }
    fn recv(&mut self, timeout: Duration) -> Result<Option<crate::protocol::ClientMessage>, AgentError> {
        (**self).recv(timeout)
    }
}

fn make_client(
    endpoint: &str,
    model: &str,
    timeout: Duration,
    chat: bool,
    env: &AgentEnv,
) -> Result<Arc<dyn CompletionClient>, AgentError> {
    if endpoint == "mock://heuristic" {
        return Ok(Arc::new(HeuristicClient));
    }
    if let Some(path) = endpoint.strip_prefix("mock://script?") {
        return Ok(Arc::new(ScriptedClient::from_file(Path::new(path))?));
    }
    let api_key = env.api_key.clone().or_else(|| std::env::var(API_KEY_ENV).ok());
    let config = HttpClientConfig { endpoint: endpoint.to_string(), model: model.to_string(), api_key, timeout, chat };
    Ok(Arc::new(HttpClient::new(config, env.limiter.clone())?))
}

/// Instantiates an agent. `seed` feeds the agent's private random stream.
pub fn build_agent(desc: &AgentDescriptor, seed: u64, env: &mut AgentEnv) -> Result<Box<dyn Agent>, AgentError> {
    desc.validate()?;
    Ok(match desc {
        AgentDescriptor::Llm { endpoint, model, score_norm, timeout_ms, chat, .. } => {
            let timeout = Duration::from_millis(*timeout_ms);
            let client = make_client(endpoint, model, timeout, *chat, env)?;
            Box::new(LlmAgent::new(client, *score_norm, timeout, seed))
        }
        AgentDescriptor::OracleCompositional { order, table } => Box::new(CompositionalBot::new(*order, table.clone())),
        AgentDescriptor::OracleMemorizer => Box::new(MemorizerBot::new()),
        AgentDescriptor::OracleNoisy { base, epsilon } => {
            let inner = build_agent(base, seed, env)?;
            Box::new(NoisyBot::new(inner, *epsilon, derive_seed(seed, "noisy")))
        }
        AgentDescriptor::HumanProxy { timeout_ms } => {
            let channel = env
                .channels
                .pop_front()
                .ok_or_else(|| AgentError::InvalidArgument("human agent needs a participant channel".into()))?;
            Box::new(HumanProxy::new(channel, Duration::from_millis(*timeout_ms)))
        }
    })
}
