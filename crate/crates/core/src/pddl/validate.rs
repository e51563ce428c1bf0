use std::fmt::Write;

use super::exec::{applicable, apply};
use super::model::*;
use super::plan::{resolve_step, StepError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    PreconditionFailure,
    GoalUnsatisfied,
    UnknownAction,
    ArityTypeError,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::PreconditionFailure => "precondition-failure",
            Verdict::GoalUnsatisfied => "goal-unsatisfied",
            Verdict::UnknownAction => "unknown-action",
            Verdict::ArityTypeError => "arity/type-error",
        }
    }
}

/// Outcome of replaying a plan from the initial state.
///
/// `failing_step` is the 0-based index of the first step that could not be
/// executed; for `GoalUnsatisfied` it is `plan.len()`, one past the last step.
/// `trace` holds the initial state followed by the state after every executed
/// step, so a plan that runs to completion has `plan.len() + 1` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub failing_step: Option<usize>,
    pub message: String,
    pub trace: Vec<State>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }

    pub fn final_state(&self) -> &State {
        self.trace.last().expect("trace always holds the initial state")
    }

    /// Structured-text report. With `with_trace` every traced state is listed.
    pub fn to_text(&self, with_trace: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verdict: {}", self.verdict.as_str());
        match self.failing_step {
            Some(i) => {
                let _ = writeln!(s, "failing_step: {i}");
            }
            None => s.push_str("failing_step: -\n"),
        }
        let _ = writeln!(s, "message: {}", self.message);
        let _ = writeln!(s, "executed_steps: {}", self.trace.len() - 1);
        if with_trace {
            for (i, st) in self.trace.iter().enumerate() {
                let _ = writeln!(s, "state {i}:");
                for a in &st.atoms {
                    let _ = writeln!(s, "  {a}");
                }
            }
        }
        s
    }
}

/// Replay `plan` from the problem's initial state. Errors are reported inside
/// the verdict; only the first failure is recorded.
pub fn validate_plan(domain: &DomainDef, problem: &ProblemDef, plan: &Plan) -> ValidationReport {
    let mut trace = vec![problem.init.clone()];
    for (i, step) in plan.steps.iter().enumerate() {
        let fail = |verdict, message: String, trace| ValidationReport {
            verdict,
            failing_step: Some(i),
            message,
            trace,
        };
        let action = match resolve_step(domain, problem, step) {
            Ok(a) => a,
            Err(StepError::UnknownAction(n)) => {
                return fail(Verdict::UnknownAction, format!("step {i}: unknown action `{n}`"), trace)
            }
            Err(StepError::ArityOrType(m)) => {
                return fail(Verdict::ArityTypeError, format!("step {i}: {m}"), trace)
            }
        };
        let cur = trace.last().unwrap();
        if !applicable(cur, &action) {
            let missing: Vec<String> = action
                .pre_pos
                .iter()
                .filter(|a| !cur.contains(a))
                .map(|a| a.to_string())
                .chain(
                    action
                        .pre_neg
                        .iter()
                        .filter(|a| cur.contains(a))
                        .map(|a| format!("(not {a})")),
                )
                .collect();
            return fail(
                Verdict::PreconditionFailure,
                format!("step {i} {}: unsatisfied {}", action.signature(), missing.join(" ")),
                trace,
            );
        }
        let next = apply(cur, &action).expect("checked applicable");
        trace.push(next);
    }
    let last = trace.last().unwrap();
    if problem.goal_satisfied(last) {
        ValidationReport {
            verdict: Verdict::Valid,
            failing_step: None,
            message: format!("plan of {} steps reaches the goal", plan.len()),
            trace,
        }
    } else {
        let unmet: Vec<String> = problem
            .goal_pos
            .iter()
            .filter(|a| !last.contains(a))
            .map(|a| a.to_string())
            .chain(
                problem
                    .goal_neg
                    .iter()
                    .filter(|a| last.contains(a))
                    .map(|a| format!("(not {a})")),
            )
            .collect();
        ValidationReport {
            verdict: Verdict::GoalUnsatisfied,
            failing_step: Some(plan.len()),
            message: format!("goal not reached: unmet {}", unmet.join(" ")),
            trace,
        }
    }
}
