//! Prompt-mode translation: a chat model does the translating, guided by
//! few-shot exemplars shipped as fixtures. Plans coming back are parsed and
//! checked against the domain before they are accepted.

use super::NlError;
use crate::pddl::{parse_plan, resolve_step, DomainDef, Plan, ProblemDef};
use crate::proposer::{ChatClient, ChatTurn, Part, TemplateSet};

/// Five domain exemplars: PDDL followed by its English rules.
pub const DOMAIN_EXEMPLARS: [&str; 5] = [
    include_str!("../../fixtures/nl/domain_blocksworld.txt"),
    include_str!("../../fixtures/nl/domain_parking.txt"),
    include_str!("../../fixtures/nl/domain_elevator.txt"),
    include_str!("../../fixtures/nl/domain_floortile.txt"),
    include_str!("../../fixtures/nl/domain_barman.txt"),
];

pub const INSTANCE_EXEMPLAR: &str = include_str!("../../fixtures/nl/instance_blocksworld.txt");

/// A syntactically valid plan that does not solve its instance, so the
/// model learns the format rather than copying a solution.
pub const PLAN_EXEMPLAR: &str = include_str!("../../fixtures/nl/plan_blocksworld.txt");

fn ask(client: &ChatClient, prompt: String, tag: &str) -> Result<String, NlError> {
    let turns = [ChatTurn::user(vec![Part::Text(prompt)])];
    client
        .call_model(&turns, 0.0, tag)
        .map_err(|e| NlError::Transport(e.to_string()))
}

fn render(templates: &TemplateSet, name: &str, values: &[(&str, &str)]) -> Result<String, NlError> {
    templates
        .render(name, values)
        .map_err(|e| NlError::Transport(e.to_string()))
}

pub fn domain_to_nl(client: &ChatClient, templates: &TemplateSet, domain_pddl: &str) -> Result<String, NlError> {
    let exemplars = DOMAIN_EXEMPLARS.join("\n\n");
    let prompt = render(templates, "nl_domain", &[("exemplars", &exemplars), ("domain_pddl", domain_pddl)])?;
    ask(client, prompt, "nl-domain")
}

pub fn instance_to_nl(client: &ChatClient, templates: &TemplateSet, instance_pddl: &str) -> Result<String, NlError> {
    let prompt = render(
        templates,
        "nl_instance",
        &[("exemplar", INSTANCE_EXEMPLAR), ("instance_pddl", instance_pddl)],
    )?;
    ask(client, prompt, "nl-instance")
}

/// Translate action texts with the model, then require every returned step
/// to name a domain action with declared, type-correct objects.
pub fn plan_to_pddl(
    client: &ChatClient,
    templates: &TemplateSet,
    action_texts: &[String],
    domain: &DomainDef,
    problem: &ProblemDef,
) -> Result<Plan, NlError> {
    let plan_text = action_texts
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {a}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = render(
        templates,
        "nl_plan",
        &[
            ("exemplar", PLAN_EXEMPLAR),
            ("domain_pddl", &domain.to_string()),
            ("instance_pddl", &problem.to_string()),
            ("plan", &plan_text),
        ],
    )?;
    let reply = ask(client, prompt, "nl-plan")?;
    let lines: String = reply
        .lines()
        .map(str::trim)
        .filter(|l| l.starts_with('('))
        .map(|l| format!("{l}\n"))
        .collect();
    let plan = parse_plan(&lines).map_err(|_| NlError::UnresolvableAction(reply.clone()))?;
    for step in &plan.steps {
        resolve_step(domain, problem, step).map_err(|_| NlError::UnresolvableAction(step.to_string()))?;
    }
    Ok(plan)
}
