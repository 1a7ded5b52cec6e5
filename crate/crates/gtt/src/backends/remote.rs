//! OpenAI-compatible chat-completions client.
//!
//! Every turn, role instructions included, is sent with its conversational
//! role (`user` or `assistant`); no `system` message is ever produced. Sampling
//! parameters are only sent when listed in `params`.

use std::fmt;
use std::sync::{Arc, Condvar, Mutex};

use gtt_core::protocol::{Agent, AgentFailure, AttemptLog, ChatRole, ChatTurn, FailureClass, RouteInfo};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value, json};

use super::retry::{AttemptError, RetryPolicy, Sleeper, with_retries};

pub const DEFAULT_URL_ENV: &str = "GTT_GATEWAY_URL";
pub const DEFAULT_KEY_ENV: &str = "GTT_API_KEY";
/// Set to a non-empty value to log request and response bodies at debug level.
pub const DEBUG_ENV: &str = "GTT_DEBUG_HTTP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSpec {
    /// Full chat-completions URL; read from `url_env` when absent.
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_url_env")]
    pub url_env: String,
    pub model_id: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub provider: Option<String>,
    #[serde(default)]
    pub display_name: Option<String>,
    /// Extra request fields (sampling parameters, routing hints).
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub debug_log: bool,
}

fn default_url_env() -> String {
    DEFAULT_URL_ENV.into()
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.into()
}

fn default_in_flight() -> usize {
    8
}

impl RemoteSpec {
    pub fn new(url: impl Into<String>, model_id: impl Into<String>) -> Self {
        RemoteSpec {
            url: Some(url.into()),
            url_env: default_url_env(),
            model_id: model_id.into(),
            api_key_env: default_key_env(),
            provider: None,
            display_name: None,
            params: Map::new(),
            retry: RetryPolicy::default(),
            max_in_flight: default_in_flight(),
            debug_log: false,
        }
    }
}

/// Credential that never prints.
#[derive(Clone)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// Masks known secrets and bearer tokens in log text.
#[derive(Debug, Clone, Default)]
pub struct Redactor {
    secrets: Vec<Secret>,
}

pub const REDACTED: &str = "[REDACTED]";

impl Redactor {
    pub fn new(secrets: impl IntoIterator<Item = Secret>) -> Self {
        Redactor { secrets: secrets.into_iter().filter(|s| !s.0.is_empty()).collect() }
    }

    pub fn redact(&self, text: &str) -> String {
        let mut out = text.to_string();
        for s in &self.secrets {
            out = out.replace(s.expose(), REDACTED);
        }
        let mut masked = String::with_capacity(out.len());
        let mut rest = out.as_str();
        while let Some(i) = rest.find("Bearer ") {
            let start = i + "Bearer ".len();
            masked.push_str(&rest[..start]);
            let tail = &rest[start..];
            let end = tail
                .find(|c: char| c.is_whitespace() || c == '"' || c == '\'' || c == ',')
                .unwrap_or(tail.len());
            if end > 0 && &tail[..end] != REDACTED {
                masked.push_str(REDACTED);
            } else {
                masked.push_str(&tail[..end]);
            }
            rest = &tail[end..];
        }
        masked.push_str(rest);
        masked
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RemoteError {
    #[error("no endpoint: set `url` or the {0} environment variable")]
    NoEndpoint(String),
    #[error("invalid retry policy: {0}")]
    Policy(String),
}

/// Shared state of one remote model: endpoint, credential, HTTP agent and
/// in-flight limit.
pub struct RemoteBackend {
    spec: RemoteSpec,
    url: String,
    key: Option<Secret>,
    http: ureq::Agent,
    limiter: Semaphore,
    sleeper: Arc<dyn Sleeper>,
    redactor: Redactor,
    debug: bool,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("url", &self.url)
            .field("model_id", &self.spec.model_id)
            .field("key", &self.key)
            .finish()
    }
}

impl RemoteBackend {
    /// Resolves the endpoint and credential from the spec and environment.
    pub fn from_env(spec: RemoteSpec, sleeper: Arc<dyn Sleeper>) -> Result<Self, RemoteError> {
        let url = match &spec.url {
            Some(u) => u.clone(),
            None => std::env::var(&spec.url_env)
                .ok()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| RemoteError::NoEndpoint(spec.url_env.clone()))?,
        };
        let key = std::env::var(&spec.api_key_env).ok().filter(|v| !v.is_empty()).map(Secret);
        let debug = spec.debug_log || std::env::var(DEBUG_ENV).is_ok_and(|v| !v.is_empty());
        Self::new(spec, url, key, sleeper, debug)
    }

    pub fn new(
        spec: RemoteSpec,
        url: String,
        key: Option<Secret>,
        sleeper: Arc<dyn Sleeper>,
        debug: bool,
    ) -> Result<Self, RemoteError> {
        spec.retry.validate().map_err(|e| RemoteError::Policy(e.to_string()))?;
        let http = ureq::Agent::config_builder()
            .timeout_global(Some(spec.retry.request_timeout()))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(RemoteBackend {
            limiter: Semaphore::new(spec.max_in_flight),
            redactor: Redactor::new(key.clone()),
            spec,
            url,
            key,
            http,
            sleeper,
            debug,
        })
    }

    pub fn spec(&self) -> &RemoteSpec {
        &self.spec
    }

    /// Request body for a conversation.
    pub fn request_body(&self, history: &[ChatTurn]) -> Value {
        let messages: Vec<Value> = history
            .iter()
            .map(|t| {
                let role = match t.role {
                    ChatRole::User => "user",
                    ChatRole::Assistant => "assistant",
                };
                json!({ "role": role, "content": t.content })
            })
            .collect();
        let mut body = Map::new();
        body.insert("model".into(), Value::String(self.spec.model_id.clone()));
        body.insert("messages".into(), Value::Array(messages));
        for (k, v) in &self.spec.params {
            if k != "model" && k != "messages" {
                body.insert(k.clone(), v.clone());
            }
        }
        Value::Object(body)
    }

    fn post_once(&self, body: &str) -> Result<(Value, Option<u16>), AttemptError> {
        let _permit = self.limiter.acquire();
        let mut req = self.http.post(&self.url).header("Content-Type", "application/json");
        if let Some(k) = &self.key {
            req = req.header("Authorization", format!("Bearer {}", k.expose()));
        }
        if self.debug {
            let auth = if self.key.is_some() { "Bearer [REDACTED]" } else { "none" };
            tracing::debug!(
                target: "gtt::http",
                url = %self.url,
                authorization = auth,
                body = %self.redactor.redact(body),
                "request"
            );
        }
        let mut resp = req.send(body).map_err(classify_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify_transport)?;
        if self.debug {
            tracing::debug!(target: "gtt::http", status, body = %self.redactor.redact(&text), "response");
        }
        let fail = |class, detail: String| AttemptError { class, status: Some(status), detail };
        match status {
            200..=299 => {}
            429 => return Err(fail(FailureClass::RateLimited, snippet(&self.redactor.redact(&text)))),
            500..=599 => return Err(fail(FailureClass::Server, snippet(&self.redactor.redact(&text)))),
            _ => return Err(fail(FailureClass::Client, snippet(&self.redactor.redact(&text)))),
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| fail(FailureClass::Malformed, format!("response is not JSON: {e}")))?;
        Ok((v, Some(status)))
    }
}

fn snippet(s: &str) -> String {
    let mut out: String = s.chars().take(300).collect();
    if out.len() < s.len() {
        out.push('…');
    }
    out
}

fn classify_transport(e: ureq::Error) -> AttemptError {
    let class = match &e {
        ureq::Error::Timeout(_) => FailureClass::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => FailureClass::Timeout,
        ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::Protocol(_)
        | ureq::Error::BodyStalled => FailureClass::Connection,
        _ => FailureClass::Client,
    };
    AttemptError { class, status: None, detail: e.to_string() }
}

/// Extracts the reply text from a chat-completions response.
pub fn reply_text(v: &Value) -> Option<&str> {
    v.get("choices")?.get(0)?.get("message")?.get("content")?.as_str()
}

/// One conversation with a remote model.
pub struct RemoteAgent {
    backend: Arc<RemoteBackend>,
    rng: ChaCha8Rng,
    attempts: Vec<AttemptLog>,
    route: RouteInfo,
}

impl RemoteAgent {
    pub fn new(backend: Arc<RemoteBackend>, seed: u64) -> Self {
        let route = RouteInfo {
            backend: "remote".into(),
            provider: backend.spec.provider.clone(),
            display_name: backend.spec.display_name.clone(),
            model_id: Some(backend.spec.model_id.clone()),
        };
        RemoteAgent { backend, rng: ChaCha8Rng::seed_from_u64(seed), attempts: Vec::new(), route }
    }

    /// Attempts made by the most recent call.
    pub fn last_attempts(&self) -> &[AttemptLog] {
        &self.attempts
    }
}

impl Agent for RemoteAgent {
    fn respond(&mut self, history: &[ChatTurn]) -> Result<String, AgentFailure> {
        let b = self.backend.clone();
        let body = b.request_body(history).to_string();
        let (result, log) = with_retries(&b.spec.retry, b.sleeper.as_ref(), &mut self.rng, |_| {
            let (v, status) = b.post_once(&body)?;
            match reply_text(&v) {
                Some(text) => Ok(((text.to_string(), v), status)),
                None => Err(AttemptError {
                    class: FailureClass::Malformed,
                    status,
                    detail: "response has no choices[0].message.content".into(),
                }),
            }
        });
        self.attempts = log;
        let (text, v) = result?;
        if let Some(p) = v.get("provider").and_then(Value::as_str) {
            self.route.provider = Some(p.to_string());
        }
        if let Some(m) = v.get("model").and_then(Value::as_str) {
            self.route.model_id = Some(m.to_string());
        }
        Ok(text)
    }

    fn route(&self) -> RouteInfo {
        self.route.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redaction_masks_keys_and_bearer_tokens() {
        let r = Redactor::new([Secret::new("sk-live-123")]);
        let s = r.redact(r#"{"key":"sk-live-123","h":"Bearer abc.def","x":1}"#);
        assert!(!s.contains("sk-live-123") && !s.contains("abc.def"), "{s}");
        assert_eq!(r.redact("Bearer [REDACTED] ok"), "Bearer [REDACTED] ok");
        assert_eq!(format!("{:?}", Secret::new("zzz")), "Secret(***)");
    }

    #[test]
    fn body_has_no_system_role_and_no_default_sampling() {
        let spec = RemoteSpec::new("http://127.0.0.1:9/v1/chat/completions", "m/x");
        let b = RemoteBackend::new(spec, "http://127.0.0.1:9".into(), None, Arc::new(super::super::retry::ThreadSleeper), false)
            .unwrap();
        let h = [ChatTurn::instruction("act as B", Some("hi".into())), ChatTurn::assistant("ok"), ChatTurn::user("q")];
        let v = b.request_body(&h);
        let roles: Vec<&str> = v["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
        assert_eq!(roles, ["user", "assistant", "user"]);
        assert_eq!(v.as_object().unwrap().len(), 2);
    }
}
