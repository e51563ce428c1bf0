//! Client for a plotting-code runner: a long-lived worker process that
//! executes model-written plotting code under time and memory limits and
//! answers with a PNG. Requests and responses are newline-delimited JSON on
//! the worker's stdin and stdout, one request in flight per worker.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxRequest {
    pub id: String,
    pub code: String,
    pub timeout_s: f64,
    pub mem_mb: u64,
}

impl SandboxRequest {
    pub fn new(id: impl Into<String>, code: impl Into<String>) -> Self {
        SandboxRequest {
            id: id.into(),
            code: code.into(),
            timeout_s: 10.0,
            mem_mb: 512,
        }
    }

    pub fn check(&self) -> Result<(), SandboxError> {
        if self.timeout_s <= 0.0 {
            return Err(SandboxError::Request("timeout must be positive".into()));
        }
        if self.code.trim().is_empty() {
            return Err(SandboxError::Request("code is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SandboxStatus {
    Ok,
    Error,
    Timeout,
    Oom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxResponse {
    pub id: String,
    pub status: SandboxStatus,
    /// Base64 PNG, present for `ok` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub png_b64: Option<String>,
    /// At most 4 KB of stderr, present unless `ok`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<String>,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("bad request: {0}")]
    Request(String),
    #[error("worker: {0}")]
    Worker(String),
    #[error("malformed worker reply: {0}")]
    Protocol(String),
}

pub trait PlotRunner: Send + Sync {
    fn run_plot_code(&self, req: &SandboxRequest) -> Result<SandboxResponse, SandboxError>;
}

struct Worker {
    _child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Runner backed by one worker subprocess speaking the JSON line protocol.
pub struct ProcessRunner {
    worker: Mutex<Worker>,
}

impl ProcessRunner {
    pub fn spawn(program: &str, args: &[&str]) -> Result<Self, SandboxError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| SandboxError::Worker(e.to_string()))?;
        let stdin = child.stdin.take().ok_or_else(|| SandboxError::Worker("no stdin".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| SandboxError::Worker("no stdout".into()))?;
        Ok(ProcessRunner {
            worker: Mutex::new(Worker {
                _child: child,
                stdin,
                stdout: BufReader::new(stdout),
            }),
        })
    }
}

impl PlotRunner for ProcessRunner {
    fn run_plot_code(&self, req: &SandboxRequest) -> Result<SandboxResponse, SandboxError> {
        req.check()?;
        let line = serde_json::to_string(req).map_err(|e| SandboxError::Protocol(e.to_string()))?;
        let mut w = self.worker.lock().unwrap();
        writeln!(w.stdin, "{line}").map_err(|e| SandboxError::Worker(e.to_string()))?;
        w.stdin.flush().map_err(|e| SandboxError::Worker(e.to_string()))?;
        let mut reply = String::new();
        let n = w
            .stdout
            .read_line(&mut reply)
            .map_err(|e| SandboxError::Worker(e.to_string()))?;
        if n == 0 {
            return Err(SandboxError::Worker("worker closed its output".into()));
        }
        let resp: SandboxResponse =
            serde_json::from_str(reply.trim()).map_err(|e| SandboxError::Protocol(e.to_string()))?;
        if resp.id != req.id {
            return Err(SandboxError::Protocol(format!("reply for `{}`, expected `{}`", resp.id, req.id)));
        }
        Ok(resp)
    }
}
