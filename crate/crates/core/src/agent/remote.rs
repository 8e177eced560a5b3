//! Minimal chat-completion client with retries, a token budget and an
//! in-flight request limit.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::parse::{parse_decision_response, parse_reflection_response};
use super::prompts::{render_decision_prompt, render_reflection_prompt, PromptOptions};
use super::{AgentBackend, AgentError, Decision, DecisionContext, ReflectionContext, ReflectionVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub temperature: f64,
    pub max_in_flight: usize,
    /// Total prompt + completion tokens allowed across all requests.
    pub token_budget: Option<u64>,
}

impl RemoteConfig {
    pub fn new(endpoint: &str, model_name: &str) -> Self {
        RemoteConfig {
            endpoint: endpoint.to_string(),
            model_name: model_name.to_string(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            temperature: 0.0,
            max_in_flight: 4,
            token_budget: None,
        }
    }

    /// Reads FA11Y_REMOTE_ENDPOINT, FA11Y_REMOTE_MODEL and FA11Y_REMOTE_API_KEY.
    pub fn from_env() -> Result<Self, RemoteError> {
        let endpoint = std::env::var("FA11Y_REMOTE_ENDPOINT").map_err(|_| RemoteError::NotConfigured("FA11Y_REMOTE_ENDPOINT"))?;
        let model = std::env::var("FA11Y_REMOTE_MODEL").unwrap_or_else(|_| "gpt-4o".into());
        let mut cfg = RemoteConfig::new(&endpoint, &model);
        cfg.api_key = std::env::var("FA11Y_REMOTE_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportFailure {
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Io(String),
}

/// Sends one JSON POST and returns `(status, body)`.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, api_key: Option<&str>, body: &Value, timeout: Duration) -> Result<(u16, String), TransportFailure>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post(&self, url: &str, api_key: Option<&str>, body: &Value, timeout: Duration) -> Result<(u16, String), TransportFailure> {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let mut req = agent.post(url).set("Content-Type", "application/json");
        if let Some(key) = api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body.clone()) {
            Ok(resp) => {
                let status = resp.status();
                resp.into_string().map(|b| (status, b)).map_err(|e| TransportFailure::Io(e.to_string()))
            }
            Err(ureq::Error::Status(code, resp)) => Ok((code, resp.into_string().unwrap_or_default())),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.to_lowercase().contains("timed out") {
                    Err(TransportFailure::Timeout)
                } else {
                    Err(TransportFailure::Io(msg))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemoteError {
    #[error("remote backend not configured: set {0}")]
    NotConfigured(&'static str),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("token budget of {budget} exhausted")]
    Budget { budget: u64 },
    #[error("unexpected response body: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

pub struct RemoteClient {
    pub config: RemoteConfig,
    transport: Arc<dyn Transport>,
    usage: Mutex<TokenUsage>,
    slots: (Mutex<usize>, Condvar),
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient").field("config", &self.config).finish_non_exhaustive()
    }
}

struct Slot<'a>(&'a (Mutex<usize>, Condvar));

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0 .0.lock().expect("slot lock") -= 1;
        self.0 .1.notify_one();
    }
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        Self::with_transport(config, Arc::new(UreqTransport))
    }

    pub fn with_transport(config: RemoteConfig, transport: Arc<dyn Transport>) -> Self {
        RemoteClient { config, transport, usage: Mutex::new(TokenUsage::default()), slots: (Mutex::new(0), Condvar::new()) }
    }

    pub fn usage(&self) -> TokenUsage {
        *self.usage.lock().expect("usage lock")
    }

    fn acquire(&self) -> Slot<'_> {
        let (lock, cv) = &self.slots;
        let limit = self.config.max_in_flight.max(1);
        let mut n = cv.wait_while(lock.lock().expect("slot lock"), |n| *n >= limit).expect("slot lock");
        *n += 1;
        Slot(&self.slots)
    }

    /// Sends `prompt` as a single user message and returns the completion text.
    pub fn invoke(&self, prompt: &str) -> Result<String, RemoteError> {
        if let Some(budget) = self.config.token_budget {
            let u = self.usage();
            if u.input + u.output >= budget {
                return Err(RemoteError::Budget { budget });
            }
        }
        let body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let _slot = self.acquire();
        let attempts = self.config.max_retries + 1;
        let mut last = RemoteError::Timeout { attempts };
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.transport.post(&self.config.endpoint, self.config.api_key.as_deref(), &body, self.config.timeout) {
                Ok((status, text)) if (200..300).contains(&status) => return self.completion(&text),
                Ok((status, text)) if status == 429 || status >= 500 => last = RemoteError::Status { status, body: text },
                Ok((status, text)) => return Err(RemoteError::Status { status, body: text }),
                Err(TransportFailure::Timeout) => last = RemoteError::Timeout { attempts },
                Err(TransportFailure::Io(e)) => last = RemoteError::Transport(e),
            }
        }
        Err(last)
    }

    fn completion(&self, body: &str) -> Result<String, RemoteError> {
        let v: Value = serde_json::from_str(body).map_err(|_| RemoteError::BadResponse(body.chars().take(200).collect()))?;
        if let Some(u) = v.get("usage") {
            let mut usage = self.usage.lock().expect("usage lock");
            usage.input += u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0);
            usage.output += u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0);
        }
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| RemoteError::BadResponse(body.chars().take(200).collect()))
    }
}

/// Agent backed by a [`RemoteClient`], keeping every exchange for audit.
#[derive(Debug)]
pub struct RemoteAgent {
    client: Arc<RemoteClient>,
    pub options: PromptOptions,
    pub exchanges: Vec<AuditEntry>,
}

impl RemoteAgent {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        RemoteAgent { client, options: PromptOptions::default(), exchanges: Vec::new() }
    }

    fn ask(&mut self, prompt: String) -> Result<String, RemoteError> {
        let result = self.client.invoke(&prompt);
        self.exchanges.push(AuditEntry {
            prompt,
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
        });
        result
    }
}

impl AgentBackend for RemoteAgent {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError> {
        let raw = self.ask(render_decision_prompt(ctx, &self.options))?;
        Ok(parse_decision_response(&raw)?)
    }

    fn reflect(&mut self, ctx: &ReflectionContext) -> Result<ReflectionVerdict, AgentError> {
        let raw = self.ask(render_reflection_prompt(ctx))?;
        Ok(parse_reflection_response(&raw)?)
    }
}
