//! Chat-completion gateway: one blocking entry point with rate limiting and
//! retry, over a pluggable transport.
//!
//! [`Gateway::send_chat`] takes care of everything between "the agent wants a
//! completion" and "here is the assistant text": it waits for rate-limit
//! headroom, dispatches through a [`ChatTransport`], and retries transient
//! failures (throttling, server errors, timeouts, connection drops) with
//! exponential backoff. Auth failures and malformed responses are returned
//! immediately. Time comes from a [`Clock`] so every policy is testable with
//! simulated time.
//!
//! API keys are taken from the environment at transport construction, never
//! from config values, and never appear in logs or debug output.

mod clock;
mod http;
mod mock;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use http::HttpTransport;
pub use mock::{mock_transport, MockTransport, ScriptedReply};

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from transport dispatch or the retry loop around it.
#[derive(Debug, Error)]
pub enum GatewayError {
    /// 401 or 403. Never retried.
    #[error("authentication rejected: {0}")]
    Auth(String),
    /// 429. Retried after backoff (honoring `retry_after` when longer).
    #[error("rate limited by server")]
    RateLimited { retry_after: Option<Duration> },
    /// 5xx. Retried after backoff.
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
    /// 2xx body that does not decode as a chat completion. Never retried.
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    /// The configured key environment variable is unset or empty.
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    /// Retry budget spent without a success.
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

impl GatewayError {
    /// Whether the retry loop may try again after this error.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::RateLimited { .. }
                | GatewayError::Server { .. }
                | GatewayError::Timeout
                | GatewayError::Network(_)
        )
    }
}

/// Where and how to reach one model behind an OpenAI-compatible API.
///
/// `api_key_env` names the environment variable holding the bearer token;
/// the key itself never lives in config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    /// Model identifier sent in the request body.
    pub model: String,
    /// API root, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "defaults::temperature")]
    pub temperature: f64,
    #[serde(default = "defaults::max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "defaults::timeout_secs")]
    pub timeout_secs: u64,
    /// Sliding-window dispatch cap: at most this many requests per minute.
    #[serde(default = "defaults::requests_per_minute")]
    pub requests_per_minute: u32,
    /// Additional attempts after the first, for retryable failures.
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
}

mod defaults {
    pub fn temperature() -> f64 {
        0.7
    }
    pub fn max_tokens() -> u32 {
        1024
    }
    pub fn timeout_secs() -> u64 {
        60
    }
    pub fn requests_per_minute() -> u32 {
        60
    }
    pub fn max_retries() -> u32 {
        3
    }
}

impl ModelEndpoint {
    /// Endpoint pointing at a local or mock server, keyed by `API_KEY`.
    pub fn new(model: impl Into<String>, base_url: impl Into<String>) -> Self {
        ModelEndpoint {
            model: model.into(),
            base_url: base_url.into(),
            api_key_env: "API_KEY".to_string(),
            temperature: defaults::temperature(),
            max_tokens: defaults::max_tokens(),
            timeout_secs: defaults::timeout_secs(),
            requests_per_minute: defaults::requests_per_minute(),
            max_retries: defaults::max_retries(),
        }
    }

    /// Packs messages with this endpoint's sampling parameters.
    pub fn chat_request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

/// Chat message author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

/// One message in a chat completion request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::Assistant,
            content: content.into(),
        }
    }
}

/// Outgoing chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Decoded chat completion: assistant text plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatReply {
    pub content: String,
    pub model: String,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

/// One request/response exchange. Implementations must be safe to share
/// across tournament worker threads.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, GatewayError>;
}

/// Sliding-window limiter: at most `capacity` acquisitions per `window`.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: u32,
    window: Duration,
    stamps: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(capacity: u32) -> Self {
        RateLimiter {
            capacity: capacity.max(1),
            window: Duration::from_secs(60),
            stamps: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks (via the clock) until a dispatch slot is free, then claims it.
    pub fn acquire(&self, clock: &dyn Clock) {
        loop {
            let wait = {
                let mut stamps = self.stamps.lock().unwrap();
                let now = clock.now();
                while stamps
                    .front()
                    .is_some_and(|&t| now.duration_since(t) >= self.window)
                {
                    stamps.pop_front();
                }
                if (stamps.len() as u32) < self.capacity {
                    stamps.push_back(now);
                    return;
                }
                self.window - now.duration_since(*stamps.front().unwrap())
            };
            clock.sleep(wait);
        }
    }
}

/// Backoff schedule for retryable failures: `base * 2^attempt`, capped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: defaults::max_retries(),
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based), stretched to any
    /// server-requested wait.
    pub fn delay(&self, attempt: u32, requested: Option<Duration>) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32 << attempt.min(16))
            .min(self.max_delay);
        exp.max(requested.unwrap_or(Duration::ZERO))
    }
}

/// Rate-limited, retrying front door to one chat endpoint.
pub struct Gateway {
    transport: Arc<dyn ChatTransport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("limiter", &self.limiter)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(transport: Arc<dyn ChatTransport>, requests_per_minute: u32) -> Self {
        Gateway {
            transport,
            clock: Arc::new(SystemClock),
            limiter: RateLimiter::per_minute(requests_per_minute),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Opens a real HTTP gateway for an endpoint, reading the key from the
    /// configured environment variable.
    pub fn for_endpoint(endpoint: &ModelEndpoint) -> Result<Self, GatewayError> {
        let transport = HttpTransport::from_endpoint(endpoint)?;
        Ok(
            Gateway::new(Arc::new(transport), endpoint.requests_per_minute).with_retry(
                RetryPolicy {
                    max_retries: endpoint.max_retries,
                    ..RetryPolicy::default()
                },
            ),
        )
    }

    /// Sends one chat request, waiting out the rate limit and retrying
    /// transient failures per the retry policy.
    pub fn send_chat(&self, request: &ChatRequest) -> Result<ChatReply, GatewayError> {
        let mut attempts = 0u32;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            attempts += 1;
            log::debug!(
                "chat dispatch attempt {attempts}: model={} messages={}",
                request.model,
                request.messages.len()
            );
            match self.transport.send(request) {
                Ok(reply) => return Ok(reply),
                Err(err) if !err.is_retryable() => return Err(err),
                Err(err) => {
                    if attempts > self.retry.max_retries {
                        return Err(GatewayError::Exhausted {
                            attempts,
                            last: err.to_string(),
                        });
                    }
                    let requested = match &err {
                        GatewayError::RateLimited { retry_after } => *retry_after,
                        _ => None,
                    };
                    let delay = self.retry.delay(attempts - 1, requested);
                    log::warn!("chat attempt {attempts} failed ({err}), retrying in {delay:?}");
                    self.clock.sleep(delay);
                }
            }
        }
    }
}

/// One-shot send over HTTP: builds a gateway for the endpoint and dispatches.
pub fn send_chat(
    endpoint: &ModelEndpoint,
    request: &ChatRequest,
) -> Result<ChatReply, GatewayError> {
    Gateway::for_endpoint(endpoint)?.send_chat(request)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reply(text: &str) -> ScriptedReply {
        ScriptedReply::Content(text.to_string())
    }

    fn gateway(
        script: Vec<ScriptedReply>,
        rpm: u32,
    ) -> (Gateway, Arc<MockTransport>, Arc<VirtualClock>) {
        let transport = Arc::new(mock_transport(script));
        let clock = Arc::new(VirtualClock::new());
        let gw = Gateway::new(transport.clone(), rpm)
            .with_clock(clock.clone())
            .with_retry(RetryPolicy {
                max_retries: 3,
                base_delay: Duration::from_secs(1),
                max_delay: Duration::from_secs(30),
            });
        (gw, transport, clock)
    }

    fn request() -> ChatRequest {
        ModelEndpoint::new("test-model", "http://unused")
            .chat_request(vec![ChatMessage::system("sys"), ChatMessage::user("hi")])
    }

    #[test]
    fn success_passes_reply_through() {
        let (gw, transport, clock) = gateway(vec![reply("hello")], 60);
        let out = gw.send_chat(&request()).unwrap();
        assert_eq!(out.content, "hello");
        assert_eq!(transport.requests().len(), 1);
        assert_eq!(clock.elapsed(), Duration::ZERO);
    }

    #[test]
    fn throttle_then_success_retries_with_backoff() {
        let (gw, transport, clock) = gateway(
            vec![
                ScriptedReply::Status(429),
                ScriptedReply::Status(500),
                reply("ok"),
            ],
            60,
        );
        let out = gw.send_chat(&request()).unwrap();
        assert_eq!(out.content, "ok");
        assert_eq!(transport.requests().len(), 3);
        // Backoff doubles: 1s after the first failure, 2s after the second.
        assert_eq!(
            clock.sleeps(),
            vec![Duration::from_secs(1), Duration::from_secs(2)]
        );
    }

    #[test]
    fn persistent_server_errors_exhaust_the_budget() {
        let script = vec![ScriptedReply::Status(503); 10];
        let (gw, transport, _clock) = gateway(script, 60);
        let err = gw.send_chat(&request()).unwrap_err();
        assert!(matches!(err, GatewayError::Exhausted { attempts: 4, .. }));
        // First attempt plus max_retries more.
        assert_eq!(transport.requests().len(), 4);
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let (gw, transport, clock) = gateway(vec![ScriptedReply::Status(401), reply("never")], 60);
        let err = gw.send_chat(&request()).unwrap_err();
        assert!(matches!(err, GatewayError::Auth(_)));
        assert_eq!(transport.requests().len(), 1);
        assert_eq!(clock.elapsed(), Duration::ZERO);
    }

    #[test]
    fn forbidden_is_not_retried() {
        let (gw, transport, _) = gateway(vec![ScriptedReply::Status(403)], 60);
        assert!(matches!(
            gw.send_chat(&request()).unwrap_err(),
            GatewayError::Auth(_)
        ));
        assert_eq!(transport.requests().len(), 1);
    }

    #[test]
    fn rate_limiter_defers_dispatch_past_window() {
        let script = (0..4).map(|i| reply(&format!("r{i}"))).collect();
        let (gw, _, clock) = gateway(script, 3);
        for _ in 0..3 {
            gw.send_chat(&request()).unwrap();
        }
        assert_eq!(clock.elapsed(), Duration::ZERO);
        gw.send_chat(&request()).unwrap();
        assert_eq!(clock.elapsed(), Duration::from_secs(60));
    }

    #[test]
    fn server_requested_wait_stretches_backoff() {
        let policy = RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(30),
        };
        assert_eq!(policy.delay(0, None), Duration::from_secs(1));
        assert_eq!(policy.delay(2, None), Duration::from_secs(4));
        assert_eq!(policy.delay(10, None), Duration::from_secs(30));
        assert_eq!(
            policy.delay(0, Some(Duration::from_secs(17))),
            Duration::from_secs(17)
        );
    }

    #[test]
    fn timeouts_and_network_errors_are_retryable() {
        let (gw, transport, _) = gateway(
            vec![ScriptedReply::Timeout, ScriptedReply::Network, reply("ok")],
            60,
        );
        assert_eq!(gw.send_chat(&request()).unwrap().content, "ok");
        assert_eq!(transport.requests().len(), 3);
    }

    #[test]
    fn mock_records_request_bodies() {
        let (gw, transport, _) = gateway(vec![reply("x")], 60);
        gw.send_chat(&request()).unwrap();
        let seen = transport.requests();
        assert_eq!(seen[0].model, "test-model");
        assert_eq!(seen[0].messages[1].content, "hi");
    }
}
