//! Blocking client for OpenAI-compatible `/chat/completions` endpoints.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::backend::{Backend, BackendConfig, RawResponse};
use crate::error::BackendError;

const MAX_BACKOFF: Duration = Duration::from_secs(30);

/// Spaces requests at least `interval` apart across all threads sharing it.
#[derive(Debug)]
pub struct Throttle {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl Throttle {
    pub fn per_second(rps: f64) -> Self {
        Self {
            interval: Duration::from_secs_f64(1.0 / rps),
            next_slot: Mutex::new(None),
        }
    }

    pub fn wait(&self) {
        let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let slot = match *next {
            Some(t) if t > now => {
                thread::sleep(t - now);
                t
            }
            _ => now,
        };
        *next = Some(slot + self.interval);
    }
}

enum Attempt {
    Done(RawResponse),
    Retry(BackendError),
    Fatal(BackendError),
}

pub struct HttpChatBackend {
    client: Client,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_tokens: u32,
    max_retries: u32,
    backoff: Duration,
    throttle: Option<Throttle>,
}

impl HttpChatBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| BackendError::Config("missing endpoint".into()))?;
        let client = Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Ok(Self {
            client,
            url: chat_url(endpoint),
            model: config.model_id.clone(),
            api_key,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
            throttle: config.requests_per_second.map(Throttle::per_second),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }

    fn attempt(&self, body: &str, attempts: u32) -> Attempt {
        if let Some(throttle) = &self.throttle {
            throttle.wait();
        }
        let mut request = self
            .client
            .post(&self.url)
            .header("Content-Type", "application/json")
            .body(body.to_owned());
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }

        let started = Instant::now();
        let response = match request.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(BackendError::Network {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(BackendError::Network {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;

        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Attempt::Fatal(BackendError::Auth(error_message(&text)));
        }
        if status == StatusCode::TOO_MANY_REQUESTS
            || status == StatusCode::REQUEST_TIMEOUT
            || status.is_server_error()
        {
            return Attempt::Retry(BackendError::Network {
                attempts,
                message: format!("HTTP {}: {}", status.as_u16(), error_message(&text)),
            });
        }
        if !status.is_success() {
            return Attempt::Fatal(BackendError::Refusal(format!(
                "HTTP {}: {}",
                status.as_u16(),
                error_message(&text)
            )));
        }

        match parse_chat_response(&text) {
            Ok(mut raw) => {
                raw.metadata.insert("latency_ms".into(), latency_ms.into());
                Attempt::Done(raw)
            }
            Err(e) => Attempt::Fatal(e),
        }
    }
}

impl Backend for HttpChatBackend {
    fn complete(&self, prompt: &str, _run_index: u32) -> Result<RawResponse, BackendError> {
        // Runs are independent samples at temperature > 0, so the run index is
        // not sent; it only separates cache entries.
        let body = self.request_body(prompt).to_string();
        let mut delay = self.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, attempts) {
                Attempt::Done(raw) => return Ok(raw),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempts > self.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    tracing::warn!(attempt = attempts, error = %e, "retrying completion");
                    thread::sleep(delay);
                    delay = (delay * 2).min(MAX_BACKOFF);
                }
            }
        }
    }
}

/// `https://host/v1` becomes `https://host/v1/chat/completions`; a full URL is kept.
pub fn chat_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_owned()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            let err = v.get("error")?;
            Some(
                err.get("message")
                    .and_then(Value::as_str)
                    .map(str::to_owned)
                    .unwrap_or_else(|| err.to_string()),
            )
        })
        .unwrap_or_else(|| body.chars().take(500).collect())
}

/// Extracts `choices[0].message.content` from a chat-completion response body.
pub fn parse_chat_response(body: &str) -> Result<RawResponse, BackendError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::Refusal(format!("response body is not JSON: {e}")))?;
    if let Some(err) = value.get("error").filter(|e| !e.is_null()) {
        let message = err
            .get("message")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .unwrap_or_else(|| err.to_string());
        return Err(BackendError::Refusal(message));
    }
    let message = value
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::Refusal("response has no choices".into()))?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or("");
    if content.is_empty() {
        let refusal = message
            .get("refusal")
            .and_then(Value::as_str)
            .unwrap_or("empty completion");
        return Err(BackendError::Refusal(refusal.to_owned()));
    }

    let mut raw = RawResponse::new(content);
    if let Some(usage) = value.get("usage") {
        for field in ["prompt_tokens", "completion_tokens"] {
            if let Some(n) = usage.get(field) {
                raw.metadata.insert(field.into(), n.clone());
            }
        }
    }
    if let Some(finish) = value.pointer("/choices/0/finish_reason") {
        raw.metadata.insert("finish_reason".into(), finish.clone());
    }
    Ok(raw)
}
