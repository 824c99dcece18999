use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::extract::label_family;
use super::prompt::{PromptBundle, Role};
use super::HarnessError;
use crate::fsutil::sha256_hex;

fn default_temperature() -> f64 {
    0.7
}
fn default_top_logprobs() -> u32 {
    10
}
fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    4
}
fn default_key_env() -> String {
    "RULELAB_API_KEY".into()
}

/// A hosted model endpoint speaking the common chat-completions /
/// completions wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_logprobs")]
    pub top_logprobs: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    /// Truncate sessions to this many sets (short-context models).
    #[serde(default)]
    pub max_sets: Option<usize>,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.temperature >= 0.0) {
            return Err(HarnessError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.top_logprobs < 1 {
            return Err(HarnessError::Config("top_logprobs must be >= 1".into()));
        }
        if self.base_url.is_empty() || self.model.is_empty() {
            return Err(HarnessError::Config("base_url and model are required".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let c: EndpointConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Hash of the fields that change what a request returns.
    pub fn cache_hash(&self) -> String {
        let key = json!({
            "base_url": self.base_url,
            "model": self.model,
            "temperature": self.temperature,
            "top_logprobs": self.top_logprobs,
            "max_tokens": self.max_tokens,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    pub fn credential(&self) -> Result<String, HarnessError> {
        match std::env::var(&self.api_key_env) {
            Ok(k) if !k.is_empty() => Ok(k),
            _ => Err(HarnessError::Credentials(self.api_key_env.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRequest {
    /// `chat/completions` or `completions`.
    pub path: String,
    pub body: Value,
}

impl ApiRequest {
    pub fn chat(cfg: &EndpointConfig, prompt: &PromptBundle) -> ApiRequest {
        let messages: Vec<Value> = prompt
            .turns
            .iter()
            .map(|t| {
                let role = match t.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({"role": role, "content": t.text})
            })
            .collect();
        ApiRequest {
            path: "chat/completions".into(),
            body: json!({
                "model": cfg.model,
                "messages": messages,
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_tokens.unwrap_or(400),
                "logprobs": true,
                "top_logprobs": cfg.top_logprobs,
            }),
        }
    }

    pub fn completion(cfg: &EndpointConfig, text: &str) -> ApiRequest {
        ApiRequest {
            path: "completions".into(),
            body: json!({
                "model": cfg.model,
                "prompt": text,
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_tokens.unwrap_or(2),
                "logprobs": cfg.top_logprobs,
            }),
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(format!("{}\n{}", self.path, self.body).as_bytes())
    }
}

/// Generated text plus, per sampled token, its top alternatives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedResponse {
    pub text: String,
    pub tokens: Vec<(String, Vec<(String, f64)>)>,
}

impl ParsedResponse {
    /// Top alternatives at each position whose sampled token is a label.
    pub fn label_positions(&self) -> Vec<&[(String, f64)]> {
        self.tokens.iter().filter(|(t, _)| label_family(t).is_some()).map(|(_, top)| top.as_slice()).collect()
    }
}

/// Reads the text and logprobs out of either response shape.
pub fn parse_response(body: &Value) -> Result<ParsedResponse, HarnessError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| HarnessError::Protocol("response has no choices".into()))?;
    if let Some(msg) = choice.get("message") {
        let text = msg.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
        let mut tokens = Vec::new();
        if let Some(content) = choice.pointer("/logprobs/content").and_then(Value::as_array) {
            for entry in content {
                let tok = entry.get("token").and_then(Value::as_str).unwrap_or_default().to_string();
                let top = entry
                    .get("top_logprobs")
                    .and_then(Value::as_array)
                    .map(|a| {
                        a.iter()
                            .filter_map(|x| Some((x.get("token")?.as_str()?.to_string(), x.get("logprob")?.as_f64()?)))
                            .collect()
                    })
                    .unwrap_or_default();
                tokens.push((tok, top));
            }
        }
        return Ok(ParsedResponse { text, tokens });
    }
    let text = choice
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| HarnessError::Protocol("choice has neither message nor text".into()))?
        .to_string();
    let mut tokens = Vec::new();
    if let (Some(toks), Some(tops)) = (
        choice.pointer("/logprobs/tokens").and_then(Value::as_array),
        choice.pointer("/logprobs/top_logprobs").and_then(Value::as_array),
    ) {
        for (t, top) in toks.iter().zip(tops) {
            let mut alts: Vec<(String, f64)> = top
                .as_object()
                .map(|m| m.iter().filter_map(|(k, v)| Some((k.clone(), v.as_f64()?))).collect())
                .unwrap_or_default();
            alts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            tokens.push((t.as_str().unwrap_or_default().to_string(), alts));
        }
    }
    Ok(ParsedResponse { text, tokens })
}

/// Anything that can answer an [`ApiRequest`].
pub trait Transport: Send + Sync {
    fn send(&self, req: &ApiRequest) -> Result<Value, HarnessError>;
}

/// Spaces requests so no more than `per_minute` start in any minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(60.0 / per_minute.max(1) as f64),
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

/// Calls `f` up to `1 + retries` times, sleeping `base * 2^k` between
/// retryable failures.
pub fn with_retry<T>(
    retries: u32,
    base: Duration,
    mut f: impl FnMut() -> Result<T, HarnessError>,
) -> Result<T, HarnessError> {
    let mut attempt = 0;
    loop {
        match f() {
            Err(e) if e.is_retryable() && attempt < retries => {
                log::warn!("attempt {} failed: {e}; retrying", attempt + 1);
                std::thread::sleep(base * 2u32.pow(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

#[cfg(feature = "http")]
pub struct HttpTransport {
    agent: ureq::Agent,
    base_url: String,
    key: String,
    retries: u32,
    limiter: Option<RateLimiter>,
}

#[cfg(feature = "http")]
impl HttpTransport {
    /// Fails immediately when the credential variable is unset.
    pub fn new(cfg: &EndpointConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let key = cfg.credential()?;
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
        Ok(HttpTransport {
            agent,
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            key,
            retries: cfg.max_retries,
            limiter: cfg.requests_per_minute.map(RateLimiter::new),
        })
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn send(&self, req: &ApiRequest) -> Result<Value, HarnessError> {
        let url = format!("{}/{}", self.base_url, req.path);
        with_retry(self.retries, Duration::from_millis(500), || {
            if let Some(l) = &self.limiter {
                l.wait();
            }
            let resp = self
                .agent
                .post(&url)
                .set("Authorization", &format!("Bearer {}", self.key))
                .send_json(req.body.clone());
            match resp {
                Ok(r) => r.into_json::<Value>().map_err(|e| HarnessError::Protocol(e.to_string())),
                Err(ureq::Error::Status(code, r)) => {
                    let body = r.into_string().unwrap_or_default();
                    Err(HarnessError::Http { status: code, body })
                }
                Err(e) => Err(HarnessError::Transport(e.to_string())),
            }
        })
    }
}
