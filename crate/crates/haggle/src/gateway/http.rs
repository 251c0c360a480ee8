//! Blocking HTTP transport for OpenAI-compatible chat completion APIs.

use std::time::Duration;

use serde::Deserialize;

use super::{ChatReply, ChatRequest, ChatTransport, GatewayError, ModelEndpoint};

/// Talks to `{base_url}/chat/completions` with a bearer token.
///
/// The token is read from the endpoint's `api_key_env` environment variable
/// at construction and is deliberately absent from `Debug` output and logs.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("url", &self.url)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpTransport {
    pub fn from_endpoint(endpoint: &ModelEndpoint) -> Result<Self, GatewayError> {
        let api_key = std::env::var(&endpoint.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::MissingApiKey(endpoint.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        Ok(HttpTransport {
            client,
            url: format!(
                "{}/chat/completions",
                endpoint.base_url.trim_end_matches('/')
            ),
            api_key,
        })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    #[serde(default)]
    model: Option<String>,
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, GatewayError> {
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    GatewayError::Timeout
                } else {
                    GatewayError::Network(e.to_string())
                }
            })?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(GatewayError::Auth(format!("status {}", status.as_u16())));
        }
        if status.as_u16() == 429 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|s| s.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(GatewayError::RateLimited { retry_after });
        }
        if status.is_server_error() {
            let body = response.text().unwrap_or_default();
            return Err(GatewayError::Server {
                status: status.as_u16(),
                body: truncate(&body, 200),
            });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(GatewayError::MalformedResponse(format!(
                "unexpected status {}: {}",
                status.as_u16(),
                truncate(&body, 200)
            )));
        }

        let body: CompletionBody = response
            .json()
            .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        let choice = body
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::MalformedResponse("no choices".to_string()))?;
        let usage = body.usage.unwrap_or_default();
        Ok(ChatReply {
            content: choice.message.content,
            model: body.model.unwrap_or_else(|| request.model.clone()),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        })
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}
