use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{ChatTurn, Part, ProposerConfig, ProposerError};

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// Base URL (`http://host/v1`) or the full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    /// First retry delay; doubled on every further retry.
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub transcript_dir: Option<PathBuf>,
}

impl ClientConfig {
    pub fn from_proposer(cfg: &ProposerConfig, api_key: Option<String>) -> Self {
        ClientConfig {
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            api_key,
            timeout: Duration::from_secs_f64(cfg.timeout_secs),
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(500),
            max_in_flight: cfg.max_in_flight.max(1),
            transcript_dir: None,
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Blocking client for an OpenAI-compatible chat-completions endpoint.
pub struct ChatClient {
    cfg: ClientConfig,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
    seq: AtomicU64,
}

struct Slot<'a>(&'a ChatClient);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.slot_free.notify_one();
    }
}

enum Attempt {
    Retry(ProposerError),
    Fatal(ProposerError),
}

pub fn turns_to_json(turns: &[ChatTurn]) -> Value {
    let b64 = base64::engine::general_purpose::STANDARD;
    Value::Array(
        turns
            .iter()
            .map(|t| {
                let content: Vec<Value> = t
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Text(s) => json!({"type": "text", "text": s}),
                        Part::Svg(svg) => json!({
                            "type": "image_url",
                            "image_url": {"url": format!("data:image/svg+xml;base64,{}", b64.encode(svg))}
                        }),
                    })
                    .collect();
                json!({"role": t.role.as_str(), "content": content})
            })
            .collect(),
    )
}

/// Assistant text from a chat-completions response body.
pub fn extract_content(body: &str) -> Result<String, ProposerError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ProposerError::Envelope(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        _ => Err(ProposerError::Envelope("no choices[0].message.content".into())),
    }
}

impl ChatClient {
    pub fn new(cfg: ClientConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        ChatClient {
            cfg,
            agent,
            in_flight: Mutex::new(0),
            slot_free: Condvar::new(),
            seq: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    fn acquire(&self) -> Slot<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cfg.max_in_flight {
            n = self.slot_free.wait(n).unwrap();
        }
        *n += 1;
        Slot(self)
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut req = self.agent.post(&self.cfg.url()).header("Content-Type", "application/json");
        if let Some(k) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Attempt::Retry(ProposerError::Timeout)),
            Err(ureq::Error::Io(e)) if e.kind() == std::io::ErrorKind::TimedOut => {
                return Err(Attempt::Retry(ProposerError::Timeout))
            }
            Err(e) => return Err(Attempt::Retry(ProposerError::Transport(e.to_string()))),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Err(Attempt::Retry(ProposerError::Timeout)),
            Err(e) => return Err(Attempt::Retry(ProposerError::Transport(e.to_string()))),
        };
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(Attempt::Retry(ProposerError::Status { status, body: text })),
            _ => Err(Attempt::Fatal(ProposerError::Status { status, body: text })),
        }
    }

    fn transcript(&self, tag: &str, request: &Value, outcome: &Result<String, ProposerError>) {
        let Some(dir) = &self.cfg.transcript_dir else { return };
        let n = self.seq.fetch_add(1, Ordering::Relaxed);
        let record = json!({
            "request": request,
            "response": match outcome {
                Ok(s) => json!({"ok": s}),
                Err(e) => json!({"error": e.to_string()}),
            }
        });
        let _ = std::fs::create_dir_all(dir);
        let path = dir.join(format!("{n:05}-{tag}.json"));
        let _ = std::fs::write(path, serde_json::to_string_pretty(&record).unwrap_or_default());
    }

    /// Send one chat request and return the assistant text. Transport
    /// failures, timeouts, 429 and 5xx responses are retried with
    /// exponential backoff; other statuses fail immediately.
    pub fn call_model(&self, turns: &[ChatTurn], temperature: f64, tag: &str) -> Result<String, ProposerError> {
        let request = json!({
            "model": self.cfg.model,
            "temperature": temperature,
            "messages": turns_to_json(turns),
        });
        let _slot = self.acquire();
        let mut delay = self.cfg.backoff;
        let mut attempt = 0;
        let outcome = loop {
            match self.attempt(&request) {
                Ok(body) => break extract_content(&body),
                Err(Attempt::Fatal(e)) => break Err(e),
                Err(Attempt::Retry(e)) => {
                    if attempt >= self.cfg.max_retries {
                        break Err(e);
                    }
                    attempt += 1;
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        };
        self.transcript(tag, &request, &outcome);
        outcome
    }
}
