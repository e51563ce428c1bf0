//! Graph-of-thought search: depth-synchronous expansion with beam
//! selection, depth-wise backtracking and state/depth budgets.

mod bootstrap;
mod engine;
mod ledger;
mod rundir;

use std::fmt;

use thiserror::Error;

use crate::diagram::{DiagramError, StyleMap};
use crate::nl::{NlError, PhraseTable};
use crate::pddl::{DomainDef, ProblemDef};
use crate::proposer::{Bundle, CallKind, ProposerError};
use crate::sim::DomainId;

pub use bootstrap::bootstrap_domain_diagram;
pub use engine::{child_key, init_endpoints, run_search, Endpoints};
pub use ledger::{BacktrackStep, DepthEntry, DepthLedger};
pub use rundir::write_run_dir;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Samples per parent.
    pub n: usize,
    /// Beam width.
    pub k: usize,
    /// Backtrack attempts per depth.
    pub backtracks: usize,
    pub max_states: usize,
    /// Longest plan considered; the root is depth 0.
    pub max_depth: usize,
    pub schema_retries: usize,
    pub code_retries: usize,
    pub no_diagram: bool,
    pub no_schema: bool,
    pub code_as_context: bool,
    pub no_beam: bool,
    pub no_backtrack: bool,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n: 4,
            k: 4,
            backtracks: 2,
            max_states: 450,
            max_depth: 100,
            schema_retries: 3,
            code_retries: 3,
            no_diagram: false,
            no_schema: false,
            code_as_context: false,
            no_beam: false,
            no_backtrack: false,
            seed: 0,
            workers: 1,
        }
    }
}

impl SearchConfig {
    /// Default budgets: 120 states / depth 28 for blocksworld, 450 / 100
    /// for the other domains.
    pub fn for_domain(id: DomainId) -> Self {
        let mut c = SearchConfig::default();
        if id == DomainId::Blocksworld {
            c.max_states = 120;
            c.max_depth = 28;
        }
        c
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 || self.k == 0 {
            return Err("branching and beam width must be at least 1".into());
        }
        if self.max_states == 0 || self.max_depth == 0 {
            return Err("budgets must be positive".into());
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Candidate,
    Validated,
    Invalid,
    Exhausted,
    Goal,
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeStatus::Candidate => "candidate",
            NodeStatus::Validated => "validated",
            NodeStatus::Invalid => "invalid",
            NodeStatus::Exhausted => "exhausted",
            NodeStatus::Goal => "goal",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub id: u64,
    pub depth: usize,
    pub parent: Option<u64>,
    pub action: Option<String>,
    pub sample_index: usize,
    pub status: NodeStatus,
    pub bundle: Bundle,
    /// Rendered SVG, when diagrams are on.
    pub svg: Option<String>,
    /// Check outcomes in pipeline order, e.g. `local: pass`.
    pub verdicts: Vec<String>,
    /// Failed schema attempts: schema text (if any) and the critique.
    pub attempts: Vec<(Option<String>, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Solved,
    Incomplete,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Solved => "solved",
            Outcome::Incomplete => "incomplete",
        })
    }
}

/// One expansion round: parents expanded at `depth` and children created.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundTrace {
    pub depth: usize,
    pub parents: usize,
    pub children: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub states_generated: usize,
    pub max_depth_reached: usize,
    pub backtracks: usize,
    pub rounds: Vec<RoundTrace>,
    pub calls: Vec<(CallKind, u64)>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: Outcome,
    /// Action texts root → goal when solved.
    pub plan: Vec<String>,
    /// Node ids root → goal when solved.
    pub goal_chain: Vec<u64>,
    pub stats: SearchStats,
    pub nodes: Vec<SearchNode>,
    /// Rankings per depth, one line per round: node ids best first.
    pub rankings: Vec<(usize, Vec<u64>)>,
    pub ledger: DepthLedger,
}

/// What the engine needs to know about the instance being solved.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub domain: &'a DomainDef,
    pub problem: &'a ProblemDef,
    pub table: &'a PhraseTable,
}

impl Instance<'_> {
    pub fn object_ids(&self) -> Vec<String> {
        self.problem.objects.keys().cloned().collect()
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("every candidate domain diagram failed its checks")]
    AllCandidatesInvalid,
    #[error("no valid schema for the {which} state after {attempts} attempts: {last}")]
    SchemaFailure {
        which: &'static str,
        attempts: usize,
        last: String,
    },
    #[error("style cache {path}: {msg}")]
    Cache { path: String, msg: String },
    #[error(transparent)]
    Proposer(#[from] ProposerError),
    #[error(transparent)]
    Nl(#[from] NlError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("run directory: {0}")]
    Io(#[from] std::io::Error),
}

/// Base style for a domain: the built-in map when the domain is one of the
/// six, otherwise one color per type.
pub fn base_style(domain: &DomainDef) -> StyleMap {
    match DomainId::from_domain_name(&domain.name) {
        Some(id) => StyleMap::default_for(id),
        None => StyleMap::generic(domain),
    }
}
