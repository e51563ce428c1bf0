use super::model::*;
use super::PddlError;

/// Parse a VAL-style plan: one `(name arg ...)` per line, `;` comments and
/// blank lines ignored.
pub fn parse_plan(text: &str) -> Result<Plan, PddlError> {
    let mut steps = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| PddlError::Syntax {
            line: lineno + 1,
            col: 1,
            msg: msg.to_string(),
        };
        let inner = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .ok_or_else(|| err("plan step must be `(name args...)`"))?;
        if inner.contains(['(', ')']) {
            return Err(err("nested parentheses in plan step"));
        }
        let mut toks = inner.split_whitespace().map(str::to_lowercase);
        let name = toks.next().ok_or_else(|| err("empty plan step"))?;
        steps.push(PlanStep {
            name,
            args: toks.collect(),
        });
    }
    Ok(Plan { steps })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepError {
    UnknownAction(String),
    ArityOrType(String),
}

/// Resolve one plan step to a ground action, checking arity, objects and
/// parameter types.
pub fn resolve_step(
    domain: &DomainDef,
    problem: &ProblemDef,
    step: &PlanStep,
) -> Result<GroundAction, StepError> {
    let schema = domain
        .action(&step.name)
        .ok_or_else(|| StepError::UnknownAction(step.name.clone()))?;
    if schema.params.len() != step.args.len() {
        return Err(StepError::ArityOrType(format!(
            "`{}` takes {} arguments, got {}",
            step.name,
            schema.params.len(),
            step.args.len()
        )));
    }
    for (arg, p) in step.args.iter().zip(&schema.params) {
        let ty = problem
            .objects
            .get(arg)
            .ok_or_else(|| StepError::ArityOrType(format!("unknown object `{arg}`")))?;
        if !domain.is_subtype(ty, &p.ty) {
            return Err(StepError::ArityOrType(format!(
                "object `{arg}` of type `{ty}` cannot bind `?{}` of type `{}`",
                p.name, p.ty
            )));
        }
    }
    Ok(schema.instantiate(&step.args))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plan_lines_and_comments() {
        let p = parse_plan("; header\n(pick-up A)\n\n  (stack a b) ; done\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.steps[0].to_string(), "(pick-up a)");
        assert_eq!(p.to_text(), "(pick-up a)\n(stack a b)\n");
        assert!(parse_plan("pick-up a").is_err());
        assert!(parse_plan("()").is_err());
    }
}
