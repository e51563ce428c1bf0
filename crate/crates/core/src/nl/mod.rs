//! Translation between PDDL and English.
//!
//! The template path is driven by a per-domain [`PhraseTable`] and is
//! lossless: every sentence it produces maps back to exactly one atom or
//! ground action. The prompt path (see [`prompt`]) asks a chat model instead
//! and post-validates its output.

pub mod prompt;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use crate::pddl::{
    resolve_step, DomainDef, GroundAction, GroundAtom, Plan, PlanStep, ProblemDef, State, StepError,
};
use crate::sim::DomainId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NlError {
    #[error("phrase table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("no phrase for {kind} `{name}`")]
    Uncovered { kind: &'static str, name: String },
    #[error("cannot resolve action text `{0}`")]
    UnresolvableAction(String),
    #[error("cannot parse sentence `{0}`")]
    UnparseableSentence(String),
    #[error("malformed instance text: {0}")]
    MalformedInstance(String),
    #[error("model transport failed: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Lit(String),
    Slot(usize),
}

/// A sentence with numbered slots, e.g. `block {0} is on block {1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    toks: Vec<Tok>,
    arity: usize,
}

impl Pattern {
    fn parse(vars: &[String], text: &str) -> Result<Pattern, String> {
        let mut toks = Vec::new();
        let mut used = vec![false; vars.len()];
        for w in text.split_whitespace() {
            if let Some(inner) = w.strip_prefix('{').and_then(|w| w.strip_suffix('}')) {
                let i = vars
                    .iter()
                    .position(|v| v == inner)
                    .ok_or_else(|| format!("slot `{{{inner}}}` is not a declared variable"))?;
                used[i] = true;
                toks.push(Tok::Slot(i));
            } else if w.contains(['{', '}']) {
                return Err(format!("malformed slot `{w}`"));
            } else {
                toks.push(Tok::Lit(w.to_lowercase()));
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(format!("variable `?{}` never appears in the pattern", vars[i]));
        }
        Ok(Pattern {
            toks,
            arity: vars.len(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn fill<S: AsRef<str>>(&self, args: &[S]) -> String {
        let mut out = String::new();
        for (i, t) in self.toks.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match t {
                Tok::Lit(s) => out.push_str(s),
                Tok::Slot(k) => out.push_str(args[*k].as_ref()),
            }
        }
        out
    }

    /// Bind slots against whitespace tokens; repeated slots must agree.
    fn bind(&self, words: &[&str]) -> Option<Vec<String>> {
        if words.len() != self.toks.len() {
            return None;
        }
        let mut args: Vec<Option<&str>> = vec![None; self.arity];
        for (t, w) in self.toks.iter().zip(words) {
            match t {
                Tok::Lit(s) if s != w => return None,
                Tok::Lit(_) => {}
                Tok::Slot(k) => match args[*k] {
                    Some(prev) if prev != *w => return None,
                    _ => args[*k] = Some(w),
                },
            }
        }
        args.into_iter().map(|a| a.map(str::to_string)).collect()
    }

    fn leading_phrase(&self) -> Vec<&str> {
        self.toks
            .iter()
            .map_while(|t| match t {
                Tok::Lit(s) => Some(s.as_str()),
                Tok::Slot(_) => None,
            })
            .collect()
    }

    /// Two patterns collide if some token sequence matches both.
    fn collides(&self, other: &Pattern) -> bool {
        self.toks.len() == other.toks.len()
            && self.toks.iter().zip(&other.toks).all(|(a, b)| match (a, b) {
                (Tok::Lit(x), Tok::Lit(y)) => x == y,
                _ => true,
            })
    }
}

/// Per-domain phrases for types, predicates and actions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhraseTable {
    pub types: BTreeMap<String, String>,
    pub predicates: BTreeMap<String, Pattern>,
    pub actions: BTreeMap<String, Pattern>,
}

impl PhraseTable {
    pub fn for_domain(id: DomainId) -> PhraseTable {
        PhraseTable::parse(id.phrase_source()).expect("corpus phrase tables are well-formed")
    }

    /// Parse the plain-text table format:
    /// `type <t> = <noun>`, `predicate <p> ?vars = <sentence>`,
    /// `action <a> ?vars = <command>`. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<PhraseTable, NlError> {
        let mut table = PhraseTable::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| NlError::Table { line: n + 1, msg };
            let (lhs, rhs) = line
                .split_once('=')
                .ok_or_else(|| err("expected `<kind> <name> ... = <phrase>`".into()))?;
            let mut head = lhs.split_whitespace();
            let kind = head.next().unwrap_or("");
            let name = head
                .next()
                .ok_or_else(|| err("missing name".into()))?
                .to_lowercase();
            let vars: Vec<String> = head
                .map(|v| {
                    v.strip_prefix('?')
                        .map(str::to_lowercase)
                        .ok_or_else(|| err(format!("variable `{v}` must start with `?`")))
                })
                .collect::<Result<_, _>>()?;
            let rhs = rhs.trim();
            if rhs.is_empty() {
                return Err(err("empty phrase".into()));
            }
            let dup = |kind: &str| err(format!("duplicate {kind} `{name}`"));
            match kind {
                "type" => {
                    if !vars.is_empty() {
                        return Err(err("types take no variables".into()));
                    }
                    if table.types.values().any(|v| v == rhs) {
                        return Err(err(format!("noun `{rhs}` already used by another type")));
                    }
                    if table.types.insert(name.clone(), rhs.to_lowercase()).is_some() {
                        return Err(dup("type"));
                    }
                }
                "predicate" | "action" => {
                    let pat = Pattern::parse(&vars, rhs).map_err(err)?;
                    let map = if kind == "predicate" {
                        &mut table.predicates
                    } else {
                        &mut table.actions
                    };
                    if let Some((other, _)) = map.iter().find(|(_, p)| p.collides(&pat)) {
                        return Err(err(format!("pattern is ambiguous with {kind} `{other}`")));
                    }
                    if kind == "action" {
                        let lead = pat.leading_phrase();
                        if lead.is_empty() {
                            return Err(err("action phrases must start with words, not a slot".into()));
                        }
                        if let Some((other, _)) = map.iter().find(|(_, p)| {
                            let o = p.leading_phrase();
                            o.starts_with(&lead) || lead.starts_with(&o)
                        }) {
                            return Err(err(format!("leading phrase overlaps action `{other}`")));
                        }
                    }
                    if map.insert(name.clone(), pat).is_some() {
                        return Err(dup(kind));
                    }
                }
                other => return Err(err(format!("unknown entry kind `{other}`"))),
            }
        }
        Ok(table)
    }

    /// Every type, predicate and action of `domain` must have a phrase of the
    /// right arity.
    pub fn check_coverage(&self, domain: &DomainDef) -> Result<(), NlError> {
        for t in &domain.type_order {
            if !self.types.contains_key(t) {
                return Err(NlError::Uncovered {
                    kind: "type",
                    name: t.clone(),
                });
            }
        }
        for p in &domain.predicates {
            match self.predicates.get(&p.name) {
                Some(pat) if pat.arity() == p.arity() => {}
                _ => {
                    return Err(NlError::Uncovered {
                        kind: "predicate",
                        name: p.name.clone(),
                    })
                }
            }
        }
        for a in &domain.actions {
            match self.actions.get(&a.name) {
                Some(pat) if pat.arity() == a.params.len() => {}
                _ => {
                    return Err(NlError::Uncovered {
                        kind: "action",
                        name: a.name.clone(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn noun<'a>(&'a self, ty: &'a str) -> &'a str {
        self.types.get(ty).map(String::as_str).unwrap_or(ty)
    }

    pub fn atom_sentence(&self, atom: &GroundAtom) -> Result<String, NlError> {
        let pat = self.predicates.get(&atom.predicate).ok_or_else(|| NlError::Uncovered {
            kind: "predicate",
            name: atom.predicate.clone(),
        })?;
        Ok(pat.fill(&atom.args))
    }

    pub fn action_text(&self, name: &str, args: &[String]) -> Result<String, NlError> {
        let pat = self.actions.get(name).ok_or_else(|| NlError::Uncovered {
            kind: "action",
            name: name.to_string(),
        })?;
        Ok(pat.fill(args))
    }

    pub fn ground_action_text(&self, action: &GroundAction) -> Result<String, NlError> {
        self.action_text(&action.name, &action.args)
    }

    /// Invert an action phrase into an unresolved plan step.
    pub fn parse_action(&self, text: &str) -> Result<PlanStep, NlError> {
        let norm = normalize(text);
        let words: Vec<&str> = norm.split_whitespace().collect();
        self.actions
            .iter()
            .find_map(|(name, pat)| {
                pat.bind(&words).map(|args| PlanStep {
                    name: name.clone(),
                    args,
                })
            })
            .ok_or_else(|| NlError::UnresolvableAction(text.trim().to_string()))
    }

    /// Invert a fact sentence. Negated sentences are reported with `false`.
    pub fn parse_sentence(&self, text: &str) -> Result<(bool, GroundAtom), NlError> {
        let norm = normalize(text);
        let (positive, body) = match norm.strip_prefix(NEGATION) {
            Some(rest) => (false, rest.trim()),
            None => (true, norm.as_str()),
        };
        let words: Vec<&str> = body.split_whitespace().collect();
        self.predicates
            .iter()
            .find_map(|(name, pat)| {
                pat.bind(&words).map(|args| GroundAtom {
                    predicate: name.clone(),
                    args,
                })
            })
            .map(|a| (positive, a))
            .ok_or_else(|| NlError::UnparseableSentence(text.trim().to_string()))
    }
}

pub(crate) const NEGATION: &str = "it is not the case that ";

/// Lowercase, collapse whitespace, and drop list markers, quotes and a
/// trailing full stop.
fn normalize(text: &str) -> String {
    let lower = text.trim().to_lowercase();
    let mut words: Vec<&str> = lower.split_whitespace().collect();
    while let Some(first) = words.first() {
        let enumerator = first.trim_end_matches(['.', ')', ':']);
        let is_marker = matches!(*first, "-" | "*" | "step" | "action:")
            || (!enumerator.is_empty()
                && enumerator.len() < first.len()
                && enumerator.trim_start_matches('(').chars().all(|c| c.is_ascii_digit()));
        if is_marker {
            words.remove(0);
        } else {
            break;
        }
    }
    let joined = words.join(" ");
    joined
        .trim_matches(|c| c == '"' || c == '`' || c == '\'')
        .trim_end_matches('.')
        .trim()
        .to_string()
}

/// Rules text: one paragraph per action with its preconditions and effects.
pub fn domain_to_nl(domain: &DomainDef, table: &PhraseTable) -> Result<String, NlError> {
    table.check_coverage(domain)?;
    let mut paragraphs = Vec::new();
    for a in &domain.actions {
        let vars: Vec<String> = a.params.iter().map(|p| format!("?{}", p.name)).collect();
        let sentence = |t: &crate::pddl::AtomTemplate| -> String {
            let args: Vec<&str> = t.args.iter().map(|&i| vars[i].as_str()).collect();
            table.predicates[&t.predicate].fill(&args)
        };
        let mut p = String::new();
        let _ = writeln!(p, "Action: {}", table.actions[&a.name].fill(&vars));
        let params: Vec<String> = a
            .params
            .iter()
            .map(|x| format!("?{} is a {}", x.name, table.noun(&x.ty)))
            .collect();
        if !params.is_empty() {
            let _ = writeln!(p, "Parameters: {}.", params.join("; "));
        }
        let pre: Vec<String> = a
            .pre_pos
            .iter()
            .map(sentence)
            .chain(a.pre_neg.iter().map(|t| format!("{NEGATION}{}", sentence(t))))
            .collect();
        let _ = writeln!(
            p,
            "Preconditions: {}.",
            if pre.is_empty() { "none".to_string() } else { pre.join("; ") }
        );
        let eff: Vec<String> = a
            .add
            .iter()
            .map(sentence)
            .chain(a.del.iter().map(|t| format!("it is no longer true that {}", sentence(t))))
            .collect();
        let _ = write!(p, "Effects: {}.", eff.join("; "));
        paragraphs.push(p);
    }
    Ok(paragraphs.join("\n\n") + "\n")
}

fn sentences(atoms: &BTreeSet<GroundAtom>, table: &PhraseTable, negated: bool) -> Result<Vec<String>, NlError> {
    atoms
        .iter()
        .map(|a| {
            let s = table.atom_sentence(a)?;
            Ok(if negated { format!("{NEGATION}{s}.") } else { format!("{s}.") })
        })
        .collect()
}

/// Instance description: objects, initial facts and goal facts, one sentence
/// per line in sorted atom order.
pub fn instance_to_nl(problem: &ProblemDef, table: &PhraseTable) -> Result<String, NlError> {
    let mut out = String::new();
    let _ = writeln!(out, "Problem: {} (domain {})", problem.name, problem.domain_name);
    let objects: Vec<String> = problem
        .objects
        .iter()
        .map(|(o, t)| format!("{} {o}", table.noun(t)))
        .collect();
    let _ = writeln!(out, "Objects: {}.", objects.join(", "));
    out.push_str("Initial state:\n");
    for s in sentences(&problem.init.atoms, table, false)? {
        let _ = writeln!(out, "{s}");
    }
    out.push_str("Goal:\n");
    if problem.goal_pos.is_empty() && problem.goal_neg.is_empty() {
        out.push_str("nothing is required; the goal is trivially satisfied.\n");
    }
    for s in sentences(&problem.goal_pos, table, false)?
        .into_iter()
        .chain(sentences(&problem.goal_neg, table, true)?)
    {
        let _ = writeln!(out, "{s}");
    }
    Ok(out)
}

/// Parse text produced by [`instance_to_nl`] back into a problem.
pub fn instance_from_nl(text: &str, domain: &DomainDef, table: &PhraseTable) -> Result<ProblemDef, NlError> {
    let bad = |m: &str| NlError::MalformedInstance(m.to_string());
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| bad("empty text"))?;
    let rest = header
        .strip_prefix("Problem: ")
        .ok_or_else(|| bad("missing `Problem:` line"))?;
    let (name, dom) = rest
        .split_once(" (domain ")
        .and_then(|(n, d)| d.strip_suffix(')').map(|d| (n, d)))
        .ok_or_else(|| bad("malformed `Problem:` line"))?;
    if dom != domain.name {
        return Err(bad(&format!("instance is for domain `{dom}`, not `{}`", domain.name)));
    }
    let objects_line = lines.next().ok_or_else(|| bad("missing `Objects:` line"))?;
    let objects_text = objects_line
        .strip_prefix("Objects:")
        .ok_or_else(|| bad("missing `Objects:` line"))?
        .trim()
        .trim_end_matches('.');
    let mut problem = ProblemDef {
        name: name.to_string(),
        domain_name: dom.to_string(),
        objects: BTreeMap::new(),
        init: State::default(),
        goal_pos: BTreeSet::new(),
        goal_neg: BTreeSet::new(),
    };
    for entry in objects_text.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (noun, id) = entry.rsplit_once(' ').ok_or_else(|| bad(&format!("object `{entry}` lacks a type")))?;
        let ty = table
            .types
            .iter()
            .find(|(_, n)| n.as_str() == noun)
            .map(|(t, _)| t.clone())
            .ok_or_else(|| bad(&format!("unknown type noun `{noun}`")))?;
        problem.objects.insert(id.to_string(), ty);
    }
    if lines.next() != Some("Initial state:") {
        return Err(bad("missing `Initial state:` section"));
    }
    let mut in_goal = false;
    for line in lines {
        if line == "Goal:" {
            in_goal = true;
            continue;
        }
        if in_goal && line.starts_with("nothing is required") {
            continue;
        }
        let (positive, atom) = table.parse_sentence(line)?;
        problem
            .check_atom(domain, &atom)
            .map_err(|e| NlError::MalformedInstance(e.to_string()))?;
        match (in_goal, positive) {
            (false, true) => {
                problem.init.atoms.insert(atom);
            }
            (false, false) => return Err(bad("negated fact in the initial state")),
            (true, true) => {
                problem.goal_pos.insert(atom);
            }
            (true, false) => {
                problem.goal_neg.insert(atom);
            }
        }
    }
    if !in_goal {
        return Err(bad("missing `Goal:` section"));
    }
    Ok(problem)
}

/// State description T(s): one sentence per fluent atom. Static facts are
/// left out; they are part of the instance text.
pub fn state_to_nl(state: &State, domain: &DomainDef, table: &PhraseTable) -> Result<String, NlError> {
    let statics = domain.static_predicates();
    let mut out = String::new();
    for a in state.atoms.iter().filter(|a| !statics.contains(&a.predicate)) {
        let _ = writeln!(out, "{}.", table.atom_sentence(a)?);
    }
    Ok(out)
}

/// Parse a state description back, restoring static facts from the
/// problem's initial state.
pub fn state_from_nl(
    text: &str,
    domain: &DomainDef,
    problem: &ProblemDef,
    table: &PhraseTable,
) -> Result<State, NlError> {
    let statics = domain.static_predicates();
    let mut state = State::new(
        problem
            .init
            .atoms
            .iter()
            .filter(|a| statics.contains(&a.predicate))
            .cloned(),
    );
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (positive, atom) = table.parse_sentence(line)?;
        if !positive {
            return Err(NlError::UnparseableSentence(line.to_string()));
        }
        state.atoms.insert(atom);
    }
    Ok(state)
}

/// Template-mode back-translation of model action strings into a plan.
/// Every step must name a known action and declared, type-correct objects.
pub fn plan_to_pddl(
    action_texts: &[String],
    domain: &DomainDef,
    problem: &ProblemDef,
    table: &PhraseTable,
) -> Result<Plan, NlError> {
    let mut steps = Vec::new();
    for t in action_texts {
        let step = table.parse_action(t)?;
        match resolve_step(domain, problem, &step) {
            Ok(_) => steps.push(step),
            Err(StepError::UnknownAction(_)) | Err(StepError::ArityOrType(_)) => {
                return Err(NlError::UnresolvableAction(t.clone()))
            }
        }
    }
    Ok(Plan { steps })
}

/// Resolve one action string to a ground action.
pub fn resolve_action_text(
    text: &str,
    domain: &DomainDef,
    problem: &ProblemDef,
    table: &PhraseTable,
) -> Result<GroundAction, NlError> {
    let step = table.parse_action(text)?;
    resolve_step(domain, problem, &step).map_err(|_| NlError::UnresolvableAction(text.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_problem;

    fn bw() -> (DomainDef, PhraseTable) {
        (DomainId::Blocksworld.domain(), PhraseTable::for_domain(DomainId::Blocksworld))
    }

    #[test]
    fn corpus_tables_cover_their_domains() {
        for id in DomainId::ALL {
            PhraseTable::for_domain(id).check_coverage(&id.domain()).unwrap();
        }
    }

    #[test]
    fn blocksworld_rules_have_one_paragraph_per_action() {
        let (d, t) = bw();
        let text = domain_to_nl(&d, &t).unwrap();
        let paragraphs: Vec<&str> = text.trim().split("\n\n").collect();
        assert_eq!(paragraphs.len(), 4);
        assert!(paragraphs.iter().all(|p| p.starts_with("Action: ")));
        assert!(text.contains("Action: pick up block ?x"));
    }

    #[test]
    fn missing_action_phrase_is_reported() {
        let (d, _) = bw();
        let t = PhraseTable::parse(
            "type block = block\npredicate on ?x ?y = {x} on {y}\npredicate ontable ?x = {x} down
             predicate clear ?x = {x} clear\npredicate handempty = hand empty\npredicate holding ?x = the hand holds {x}
             action pick-up ?x = pick up {x}",
        )
        .unwrap();
        assert_eq!(
            domain_to_nl(&d, &t),
            Err(NlError::Uncovered {
                kind: "action",
                name: "put-down".into()
            })
        );
    }

    #[test]
    fn instance_text_and_parse_back() {
        let (d, t) = bw();
        let p = parse_problem(
            "(define (problem p1) (:domain blocksworld) (:objects a b - block)
              (:init (on a b) (ontable b) (clear a) (handempty)) (:goal (and (on b a) (not (on a b)))))",
            &d,
        )
        .unwrap();
        let text = instance_to_nl(&p, &t).unwrap();
        assert!(text.contains("block a is on block b"));
        assert!(text.contains("it is not the case that block a is on block b."));
        assert_eq!(text, instance_to_nl(&p, &t).unwrap());
        assert_eq!(instance_from_nl(&text, &d, &t).unwrap(), p);

        let mut empty = p.clone();
        empty.goal_pos.clear();
        empty.goal_neg.clear();
        let text = instance_to_nl(&empty, &t).unwrap();
        assert!(text.contains("trivially satisfied"));
        assert_eq!(instance_from_nl(&text, &d, &t).unwrap(), empty);
        assert!(instance_from_nl("Problem: x", &d, &t).is_err());
    }

    #[test]
    fn action_inversion() {
        let (d, t) = bw();
        let p = parse_problem(
            "(define (problem p1) (:domain blocksworld) (:objects a b - block) (:init) (:goal (and)))",
            &d,
        )
        .unwrap();
        let texts = vec!["Pick up block a".to_string(), "2. stack block a on block b.".to_string()];
        let plan = plan_to_pddl(&texts, &d, &p, &t).unwrap();
        assert_eq!(plan.to_text(), "(pick-up a)\n(stack a b)\n");
        assert!(matches!(
            plan_to_pddl(&["fly to the moon".to_string()], &d, &p, &t),
            Err(NlError::UnresolvableAction(_))
        ));
        assert!(plan_to_pddl(&["pick up block zz".to_string()], &d, &p, &t).is_err());
    }

    #[test]
    fn ambiguous_tables_are_rejected() {
        let err = PhraseTable::parse("action a ?x = move {x}\naction b ?y = move {y} now\naction c ?z = move {z}");
        assert!(matches!(err, Err(NlError::Table { line: 2, .. })));
        let err = PhraseTable::parse("predicate p ?x = {x} is red\npredicate q ?x = {x} is red");
        assert!(matches!(err, Err(NlError::Table { line: 2, .. })));
    }
}
