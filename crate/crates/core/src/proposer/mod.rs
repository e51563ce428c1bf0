//! The decision interface the search engine calls, with a live chat-model
//! backend and a simulator-backed oracle.

mod client;
mod live;
mod oracle;
mod template;

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::diagram::{DiagramError, DiagramSchema, StyleMap};
use crate::nl::NlError;

pub use client::{ChatClient, ClientConfig};
pub use live::{parse_ranking, parse_verdict, LiveProposer};
pub use oracle::{call_rng, OracleProposer};
pub use template::{Template, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Text(String),
    /// SVG document bytes, sent as a base64 data URL.
    Svg(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatTurn {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl ChatTurn {
    pub fn system(text: impl Into<String>) -> Self {
        ChatTurn {
            role: Role::System,
            parts: vec![Part::Text(text.into())],
        }
    }

    pub fn user(parts: Vec<Part>) -> Self {
        ChatTurn { role: Role::User, parts }
    }

    /// Image parts are only allowed on user turns and a turn needs content.
    pub fn is_well_formed(&self) -> bool {
        !self.parts.is_empty()
            && (self.role == Role::User || self.parts.iter().all(|p| matches!(p, Part::Text(_))))
    }
}

/// Settings of the live backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposerConfig {
    pub endpoint: String,
    pub model: String,
    /// Sampling temperature per sample index.
    pub temperatures: Vec<f64>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// `builtin` or a directory of template files.
    pub templates: String,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        ProposerConfig {
            endpoint: String::new(),
            model: "gpt-4o".into(),
            temperatures: vec![0.0, 0.3, 0.7, 1.0],
            timeout_secs: 120.0,
            max_retries: 3,
            max_in_flight: 4,
            templates: "builtin".into(),
        }
    }
}

impl ProposerConfig {
    pub fn temperature(&self, sample_index: usize) -> f64 {
        self.temperatures
            .get(sample_index)
            .or(self.temperatures.last())
            .copied()
            .unwrap_or(0.0)
    }

    pub fn check(&self, branching: usize) -> Result<(), String> {
        if self.temperatures.len() < branching {
            return Err(format!(
                "temperature schedule has {} entries but branching is {branching}",
                self.temperatures.len()
            ));
        }
        if self.temperatures.iter().any(|t| !(*t >= 0.0)) {
            return Err("temperatures must be non-negative".into());
        }
        if !(self.timeout_secs > 0.0) {
            return Err("timeout must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionProposal {
    pub action_text: String,
    pub next_state_text: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub pass: bool,
    pub critique: String,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            pass: true,
            critique: String::new(),
        }
    }

    pub fn fail(critique: impl Into<String>) -> Self {
        let critique = critique.into();
        Verdict {
            pass: false,
            critique: if critique.is_empty() { "rejected".into() } else { critique },
        }
    }
}

/// How a node's diagram is shown to a model.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagramPayload {
    /// Rendered SVG attached as an image.
    Image(String),
    /// Render source given as text instead of an image.
    Source(String),
}

/// Everything a proposer sees about one node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bundle {
    /// Node id; tie-breaker for rankings.
    pub id: u64,
    /// Stable key for seeded randomness. Unlike ids it does not depend on
    /// the order in which parallel expansions finish.
    pub key: u64,
    pub state_text: String,
    pub schema: Option<String>,
    pub diagram: Option<DiagramPayload>,
    /// Action texts from the root to this node.
    pub path: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ProposerError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response envelope: {0}")]
    Envelope(String),
    #[error("could not parse {kind} from model output: {output}")]
    Unparseable { kind: &'static str, output: String },
    #[error("template error: {0}")]
    Template(String),
    #[error("no candidates to rank")]
    EmptyCandidates,
    #[error(transparent)]
    Nl(#[from] NlError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// Kinds of proposer calls, for counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CallKind {
    DomainSchemas,
    RankSchemas,
    ProposeAction,
    MakeSchema,
    ReflectSchema,
    VerifyLocal,
    VerifyGlobal,
    CheckGoal,
    RankStates,
}

impl CallKind {
    pub const ALL: [CallKind; 9] = [
        CallKind::DomainSchemas,
        CallKind::RankSchemas,
        CallKind::ProposeAction,
        CallKind::MakeSchema,
        CallKind::ReflectSchema,
        CallKind::VerifyLocal,
        CallKind::VerifyGlobal,
        CallKind::CheckGoal,
        CallKind::RankStates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::DomainSchemas => "domain_schemas",
            CallKind::RankSchemas => "rank_schemas",
            CallKind::ProposeAction => "propose_action",
            CallKind::MakeSchema => "make_schema",
            CallKind::ReflectSchema => "reflect_schema",
            CallKind::VerifyLocal => "verify_local",
            CallKind::VerifyGlobal => "verify_global",
            CallKind::CheckGoal => "check_goal",
            CallKind::RankStates => "rank_states",
        }
    }
}

/// Thread-safe per-kind call counters.
#[derive(Debug, Default)]
pub struct CallCounters([AtomicU64; 9]);

impl CallCounters {
    pub fn bump(&self, kind: CallKind) {
        self.0[kind as usize].fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self, kind: CallKind) -> u64 {
        self.0[kind as usize].load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> Vec<(CallKind, u64)> {
        CallKind::ALL.iter().map(|&k| (k, self.get(k))).collect()
    }
}

/// The model duties of the search. Implementations must tolerate
/// concurrent calls from sibling expansions.
pub trait Proposer: Send + Sync {
    /// Candidate reference schemas (schema text) for the domain.
    fn propose_domain_schemas(&self, domain_text: &str, count: usize) -> Result<Vec<String>, ProposerError>;

    /// Order checked candidate schemas, best first.
    fn rank_schemas(&self, candidates: &[DiagramSchema], expected_objects: &[String]) -> Result<Vec<usize>, ProposerError>;

    fn propose_action(&self, ctx: &Bundle, goal: &Bundle, sample_index: usize) -> Result<ActionProposal, ProposerError>;

    /// Schema text for a state description.
    fn make_schema(&self, key: u64, state_text: &str, action_text: Option<&str>, style: &StyleMap) -> Result<String, ProposerError>;

    fn reflect_schema(
        &self,
        key: u64,
        attempt: usize,
        schema: &DiagramSchema,
        state_text: &str,
        action_text: Option<&str>,
        style: &StyleMap,
    ) -> Result<Verdict, ProposerError>;

    fn verify_local(&self, parent: &Bundle, child: &Bundle, action_text: &str) -> Result<Verdict, ProposerError>;

    /// `child.path` is the full action path A_{0:d+1}.
    fn verify_global(&self, init: &Bundle, child: &Bundle, goal: &Bundle) -> Result<Verdict, ProposerError>;

    fn check_goal(&self, node: &Bundle, goal: &Bundle) -> Result<bool, ProposerError>;

    /// Order candidates, best first.
    fn rank_states(&self, candidates: &[&Bundle], goal: &Bundle) -> Result<Vec<usize>, ProposerError>;

    fn counters(&self) -> &CallCounters;
}

/// Canonical form used to compare sibling proposals: lowercase with
/// whitespace collapsed and a trailing period dropped.
pub fn canonical_action(text: &str) -> String {
    let lower = text.trim().trim_end_matches('.').to_lowercase();
    lower.split_whitespace().collect::<Vec<_>>().join(" ")
}
