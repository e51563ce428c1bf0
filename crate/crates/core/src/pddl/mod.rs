//! STRIPS subset of PDDL: parsing, printing, grounding, execution and plan
//! validation.
//!
//! Supported requirements are `:strips`, `:typing` and
//! `:negative-preconditions`; anything else is rejected when parsing.

mod exec;
mod ground;
mod model;
mod parse;
mod plan;
mod print;
pub mod sexpr;
mod validate;

pub use exec::{applicable, apply};
pub use ground::{ground, ground_relevant, Grounding};
pub use model::*;
pub use parse::{parse_domain, parse_problem};
pub use plan::{parse_plan, resolve_step, StepError};
pub use validate::{validate_plan, ValidationReport, Verdict};

use thiserror::Error;

pub const SUPPORTED_REQUIREMENTS: [&str; 3] = [":strips", ":typing", ":negative-preconditions"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsupported requirement `{0}` (supported: :strips, :typing, :negative-preconditions)")]
    UnsupportedRequirement(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown variable `?{0}`")]
    UnknownVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("cyclic type hierarchy involving `{0}`")]
    CyclicTypes(String),
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("contradiction: {0}")]
    Contradiction(String),
    #[error("action {0} is not applicable")]
    InapplicableAction(String),
}
