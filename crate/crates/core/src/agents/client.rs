//! Completion clients: the trait, candidate scoring, and an OpenAI-compatible
//! HTTP implementation.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::PromptBundle;
use super::AgentError;

/// Environment variable holding the endpoint API key.
pub const API_KEY_ENV: &str = "REFGAME_LLM_API_KEY";
const MAX_ATTEMPTS: usize = 3;
const MAX_LABEL_TOKENS: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("endpoint cannot score continuations: {0}")]
    Capability(String),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl From<ClientError> for AgentError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Capability(m) => AgentError::Capability(format!(
                "{m}; use an endpoint that returns prompt log-probabilities (completions API with echo + logprobs)"
            )),
            other => AgentError::Unavailable(other.to_string()),
        }
    }
}

/// A stateless language-model endpoint.
pub trait CompletionClient: Send + Sync {
    /// Greedy completion of the prompt.
    fn complete(&self, bundle: &PromptBundle) -> Result<String, ClientError>;

    /// Log-probabilities of the tokens of `continuation` appended to the prompt.
    fn continuation_logprobs(&self, bundle: &PromptBundle, continuation: &str) -> Result<Vec<f64>, ClientError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScoreNorm {
    /// Sum of token log-probabilities.
    None,
    /// Mean token log-probability.
    #[default]
    PerToken,
}

impl ScoreNorm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" | "sum" => Some(ScoreNorm::None),
            "perToken" | "per-token" | "mean" => Some(ScoreNorm::PerToken),
            _ => None,
        }
    }

    pub fn score(self, logprobs: &[f64]) -> f64 {
        let sum: f64 = logprobs.iter().sum();
        match self {
            ScoreNorm::None => sum,
            ScoreNorm::PerToken if logprobs.is_empty() => f64::NEG_INFINITY,
            ScoreNorm::PerToken => sum / logprobs.len() as f64,
        }
    }
}

/// Index of the highest-scoring candidate; ties go to the lowest index.
pub fn argmax_score(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Scores each candidate as a continuation of the prompt and returns the best.
pub fn score_candidates(
    bundle: &PromptBundle,
    candidates: &[String],
    client: &dyn CompletionClient,
    norm: ScoreNorm,
) -> Result<usize, AgentError> {
    if candidates.len() < 2 {
        return Err(AgentError::InvalidArgument(format!("need at least 2 candidates, got {}", candidates.len())));
    }
    let scores = candidates
        .iter()
        .map(|c| client.continuation_logprobs(bundle, c).map(|lp| norm.score(&lp)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(argmax_score(&scores))
}

/// Cuts a raw completion at the first closing quote, brace or newline.
pub fn cut_completion(text: &str) -> &str {
    let end = text.find(['\'', '}', '\n']).unwrap_or(text.len());
    &text[..end]
}

/// Global request limiter shared by every client of a process.
#[derive(Debug)]
pub struct TokenBucket {
    rate_per_sec: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64) -> Self {
        TokenBucket { rate_per_sec, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("bucket mutex poisoned");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate_per_sec;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate_per_sec
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpClientConfig {
    /// Base URL including the version prefix, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Generate through the chat API instead of the raw completions API.
    pub chat: bool,
}

/// Client for OpenAI-compatible `/completions` and `/chat/completions` endpoints.
pub struct HttpClient {
    config: HttpClientConfig,
    http: reqwest::blocking::Client,
    limiter: Option<Arc<TokenBucket>>,
}

impl HttpClient {
    pub fn new(config: HttpClientConfig, limiter: Option<Arc<TokenBucket>>) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpClient { config, http, limiter })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        let mut last = ClientError::Transport("no attempt made".into());
        for attempt in 0..MAX_ATTEMPTS {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let mut req = self.http.post(self.url(path)).json(body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
                    if status.is_success() {
                        return serde_json::from_str(&text).map_err(|e| ClientError::Decode(e.to_string()));
                    }
                    let err = ClientError::Http { status: status.as_u16(), body: text };
                    if !status.is_server_error() {
                        return Err(err);
                    }
                    last = err;
                }
                Err(e) => last = ClientError::Transport(e.to_string()),
            }
            log::warn!("request to {path} failed (attempt {}): {last}", attempt + 1);
            thread::sleep(Duration::from_millis(200 << attempt));
        }
        Err(last)
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, ClientError> {
        let stop = json!(["'", "}", "\n"]);
        if self.config.chat {
            let body = json!({
                "model": self.config.model,
                "messages": [
                    {"role": "system", "content": bundle.system_text},
                    {"role": "user", "content": bundle.user_text},
                ],
                "temperature": 0,
                "max_tokens": MAX_LABEL_TOKENS,
                "stop": stop,
            });
            let v = self.post("chat/completions", &body)?;
            v["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| ClientError::Decode("missing choices[0].message.content".into()))
        } else {
            let body = json!({
                "model": self.config.model,
                "prompt": bundle.render_raw(),
                "temperature": 0,
                "max_tokens": MAX_LABEL_TOKENS,
                "stop": stop,
            });
            let v = self.post("completions", &body)?;
            v["choices"][0]["text"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| ClientError::Decode("missing choices[0].text".into()))
        }
    }

    fn continuation_logprobs(&self, bundle: &PromptBundle, continuation: &str) -> Result<Vec<f64>, ClientError> {
        let prompt = bundle.render_raw();
        let body = json!({
            "model": self.config.model,
            "prompt": format!("{prompt}{continuation}"),
            "temperature": 0,
            "max_tokens": 1,
            "echo": true,
            "logprobs": 1,
        });
        let v = self.post("completions", &body)?;
        extract_continuation_logprobs(&v, prompt.chars().count(), continuation.chars().count())
    }
}

/// Picks the log-probabilities of tokens overlapping the continuation span
/// `[prompt_chars, prompt_chars + continuation_chars)` from an echoed
/// completions response.
pub fn extract_continuation_logprobs(
    response: &Value,
    prompt_chars: usize,
    continuation_chars: usize,
) -> Result<Vec<f64>, ClientError> {
    let lp = &response["choices"][0]["logprobs"];
    let (Some(tokens), Some(token_lp), Some(offsets)) = (
        lp["tokens"].as_array(),
        lp["token_logprobs"].as_array(),
        lp["text_offset"].as_array(),
    ) else {
        return Err(ClientError::Capability("response has no echoed token logprobs".into()));
    };
    let end = prompt_chars + continuation_chars;
    let mut out = Vec::new();
    for ((tok, lp), off) in tokens.iter().zip(token_lp).zip(offsets) {
        let off = off.as_u64().ok_or_else(|| ClientError::Decode("bad text_offset".into()))? as usize;
        let len = tok.as_str().map(|t| t.chars().count()).unwrap_or(0);
        if off < end && off + len > prompt_chars {
            let v = lp.as_f64().ok_or_else(|| ClientError::Capability("null logprob inside continuation".into()))?;
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(ClientError::Capability("no tokens cover the continuation".into()));
    }
    Ok(out)
}
