//! Scripted transport for tests and offline demos.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::{ChatReply, ChatRequest, ChatTransport, GatewayError};

/// One scripted transport outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedReply {
    /// Successful completion with this assistant text.
    Content(String),
    /// HTTP-style failure with this status code (401, 429, 500, ...).
    Status(u16),
    Timeout,
    Network,
}

impl ScriptedReply {
    pub fn content(text: impl Into<String>) -> Self {
        ScriptedReply::Content(text.into())
    }
}

/// Transport that pops pre-scripted replies and records every request.
///
/// Thread-safe, so a tournament can drive it from worker threads; replies
/// are handed out in script order regardless of which thread asks.
#[derive(Debug, Default)]
pub struct MockTransport {
    script: Mutex<VecDeque<ScriptedReply>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl MockTransport {
    pub fn new(script: Vec<ScriptedReply>) -> Self {
        MockTransport {
            script: Mutex::new(script.into()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Appends more replies to the script.
    pub fn push(&self, reply: ScriptedReply) {
        self.script.lock().unwrap().push_back(reply);
    }

    /// Every request seen so far, in dispatch order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }

    /// Replies not yet consumed.
    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap().len()
    }
}

impl ChatTransport for MockTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, GatewayError> {
        self.requests.lock().unwrap().push(request.clone());
        let next = self.script.lock().unwrap().pop_front();
        match next {
            Some(ScriptedReply::Content(content)) => Ok(ChatReply {
                content,
                model: request.model.clone(),
                prompt_tokens: 0,
                completion_tokens: 0,
            }),
            Some(ScriptedReply::Status(401)) => Err(GatewayError::Auth("status 401".to_string())),
            Some(ScriptedReply::Status(403)) => Err(GatewayError::Auth("status 403".to_string())),
            Some(ScriptedReply::Status(429)) => Err(GatewayError::RateLimited {
                retry_after: Some(Duration::from_secs(1)),
            }),
            Some(ScriptedReply::Status(status)) if status >= 500 => Err(GatewayError::Server {
                status,
                body: "scripted failure".to_string(),
            }),
            Some(ScriptedReply::Status(status)) => Err(GatewayError::MalformedResponse(format!(
                "scripted status {status}"
            ))),
            Some(ScriptedReply::Timeout) => Err(GatewayError::Timeout),
            Some(ScriptedReply::Network) => Err(GatewayError::Network(
                "scripted network failure".to_string(),
            )),
            None => Err(GatewayError::MalformedResponse(
                "mock script exhausted".to_string(),
            )),
        }
    }
}

/// Builds a transport that replays `script` in order.
pub fn mock_transport(script: Vec<ScriptedReply>) -> MockTransport {
    MockTransport::new(script)
}
