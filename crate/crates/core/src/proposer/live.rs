use super::{
    ActionProposal, Bundle, CallCounters, CallKind, ChatClient, ChatTurn, DiagramPayload, Part, Proposer,
    ProposerConfig, ProposerError, TemplateSet, Verdict,
};
use crate::diagram::{DiagramSchema, StyleMap};

const SYSTEM: &str = "You are a careful planning assistant. Follow the requested answer format exactly.";

/// Statement syntax shown to the model whenever it must write a schema.
pub const SCHEMA_FORMAT: &str = "\
title <text>
canvas <width>x<height>
object <id> shape=<circle|square|rectangle|line|triangle|label-only> color=<palette name> size=<w>x<h> pos=<at(x,y)|above(id,gap)|below(id,gap)|left-of(id,gap)|right-of(id,gap)|inside(id,gap)> status=<text or -> label=<text>
Palette: white black gray red orange yellow green teal blue purple pink brown. Units are grid cells, y points up. Quote values containing spaces.";

/// Chat-model backend. One instance serves one problem; the domain and
/// instance descriptions are fixed at construction.
pub struct LiveProposer {
    client: ChatClient,
    templates: TemplateSet,
    config: ProposerConfig,
    domain_text: String,
    instance_text: String,
    counters: CallCounters,
}

fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        let t = l.trim().trim_start_matches(['*', '#', ' ']);
        let head = t.get(..key.len())?;
        head.eq_ignore_ascii_case(key).then(|| t[key.len()..].trim().trim_matches('*').trim())
    })
}

/// `VERDICT: PASS|FAIL` plus an optional `CRITIQUE:` line.
pub fn parse_verdict(text: &str) -> Option<Verdict> {
    let v = field(text, "VERDICT:")?.to_ascii_uppercase();
    let critique = field(text, "CRITIQUE:").unwrap_or("").to_string();
    if v.starts_with("PASS") {
        Some(Verdict { pass: true, critique })
    } else if v.starts_with("FAIL") {
        Some(Verdict::fail(critique))
    } else {
        None
    }
}

/// `RANKING: 2, 1, 3` (1-based) into 0-based indices. Candidates the model
/// left out are appended in their original order; repeats and out-of-range
/// numbers make the answer unusable.
pub fn parse_ranking(text: &str, n: usize) -> Option<Vec<usize>> {
    let list = field(text, "RANKING:")?;
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for tok in list.split([',', ' ', '>']).map(str::trim).filter(|t| !t.is_empty()) {
        let i: usize = tok.trim_start_matches('#').parse().ok()?;
        if i == 0 || i > n || seen[i - 1] {
            return None;
        }
        seen[i - 1] = true;
        out.push(i - 1);
    }
    out.extend((0..n).filter(|&i| !seen[i]));
    Some(out)
}

fn parse_proposal(text: &str) -> Option<ActionProposal> {
    let action = field(text, "ACTION:")?.to_string();
    if action.is_empty() {
        return None;
    }
    let mut state = Vec::new();
    let mut in_state = false;
    for line in text.lines() {
        let t = line.trim();
        let upper = t.to_ascii_uppercase();
        if upper.starts_with("NEXT STATE:") {
            in_state = true;
            let rest = t["NEXT STATE:".len()..].trim();
            if !rest.is_empty() {
                state.push(rest.to_string());
            }
        } else if upper.starts_with("RATIONALE:") {
            in_state = false;
        } else if in_state && !t.is_empty() {
            state.push(t.to_string());
        }
    }
    Some(ActionProposal {
        action_text: action,
        next_state_text: state.join("\n") + "\n",
        rationale: field(text, "RATIONALE:").unwrap_or("").to_string(),
    })
}

/// Schema statements from a reply, ignoring code fences and chatter.
pub fn extract_schema(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| l.starts_with("title ") || l.starts_with("canvas ") || l.starts_with("object "))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn numbered(path: &[String]) -> String {
    if path.is_empty() {
        return "(none yet)".into();
    }
    path.iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {a}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

impl LiveProposer {
    pub fn new(client: ChatClient, templates: TemplateSet, config: ProposerConfig, domain_text: String, instance_text: String) -> Self {
        LiveProposer {
            client,
            templates,
            config,
            domain_text,
            instance_text,
            counters: CallCounters::default(),
        }
    }

    fn diagram_parts(parts: &mut Vec<Part>, b: &Bundle) {
        match &b.diagram {
            Some(DiagramPayload::Image(svg)) => parts.push(Part::Svg(svg.clone())),
            Some(DiagramPayload::Source(src)) => {
                let mut t = String::from("Diagram source:\n");
                if let Some(s) = &b.schema {
                    t.push_str(s);
                }
                t.push_str(src);
                parts.push(Part::Text(t));
            }
            None => {}
        }
    }

    fn ask(&self, prompt: String, bundles: &[&Bundle], temperature: f64, tag: String) -> Result<String, ProposerError> {
        let mut parts = vec![Part::Text(prompt)];
        for b in bundles {
            Self::diagram_parts(&mut parts, b);
        }
        let turns = [ChatTurn::system(SYSTEM), ChatTurn::user(parts)];
        self.client.call_model(&turns, temperature, &tag)
    }

    fn state_with_schema(b: &Bundle) -> String {
        match (&b.schema, &b.diagram) {
            (Some(s), Some(DiagramPayload::Image(_))) => format!("{}\nDiagram schema:\n{s}", b.state_text),
            _ => b.state_text.clone(),
        }
    }

    /// Ask until `parse` accepts the reply, at most `max_retries + 1` times.
    fn ask_parsed<T>(
        &self,
        kind: &'static str,
        prompt: String,
        bundles: &[&Bundle],
        temperature: f64,
        tag: String,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, ProposerError> {
        let mut last = String::new();
        for _ in 0..=self.config.max_retries {
            last = self.ask(prompt.clone(), bundles, temperature, tag.clone())?;
            if let Some(v) = parse(&last) {
                return Ok(v);
            }
        }
        Err(ProposerError::Unparseable { kind, output: last })
    }
}

impl Proposer for LiveProposer {
    fn propose_domain_schemas(&self, domain_text: &str, count: usize) -> Result<Vec<String>, ProposerError> {
        self.counters.bump(CallKind::DomainSchemas);
        let prompt = self.templates.render(
            "domain_diagram",
            &[("domain", domain_text), ("instance", &self.instance_text), ("format", SCHEMA_FORMAT)],
        )?;
        (0..count)
            .map(|i| {
                let reply = self.ask(prompt.clone(), &[], self.config.temperature(i), format!("domain-schema-{i}"))?;
                Ok(extract_schema(&reply))
            })
            .collect()
    }

    fn rank_schemas(&self, candidates: &[DiagramSchema], _expected: &[String]) -> Result<Vec<usize>, ProposerError> {
        self.counters.bump(CallKind::RankSchemas);
        if candidates.is_empty() {
            return Err(ProposerError::EmptyCandidates);
        }
        let listing: String = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| format!("Candidate {}:\n{}\n", i + 1, c.to_text()))
            .collect();
        let prompt = self.templates.render("rank_diagrams", &[("candidates", &listing)])?;
        let n = candidates.len();
        self.ask_parsed("ranking", prompt, &[], 0.0, "rank-schemas".into(), |t| parse_ranking(t, n))
    }

    fn propose_action(&self, ctx: &Bundle, goal: &Bundle, sample_index: usize) -> Result<ActionProposal, ProposerError> {
        self.counters.bump(CallKind::ProposeAction);
        let prompt = self.templates.render(
            "propose_action",
            &[
                ("domain", &self.domain_text),
                ("instance", &self.instance_text),
                ("state", &Self::state_with_schema(ctx)),
                ("path", &numbered(&ctx.path)),
                ("goal", &goal.state_text),
            ],
        )?;
        self.ask_parsed(
            "action proposal",
            prompt,
            &[ctx, goal],
            self.config.temperature(sample_index),
            format!("propose-{:016x}-{sample_index}", ctx.key),
            parse_proposal,
        )
    }

    fn make_schema(&self, key: u64, state_text: &str, action: Option<&str>, style: &StyleMap) -> Result<String, ProposerError> {
        self.counters.bump(CallKind::MakeSchema);
        let prompt = self.templates.render(
            "schema",
            &[
                ("state", state_text),
                ("action", action.unwrap_or("(initial state)")),
                ("style", &style.to_text()),
                ("format", SCHEMA_FORMAT),
            ],
        )?;
        self.ask_parsed("schema", prompt, &[], 0.0, format!("schema-{key:016x}"), |t| {
            let s = extract_schema(t);
            DiagramSchema::parse(&s).ok().map(|_| s)
        })
    }

    fn reflect_schema(
        &self,
        key: u64,
        attempt: usize,
        schema: &DiagramSchema,
        state_text: &str,
        action: Option<&str>,
        _style: &StyleMap,
    ) -> Result<Verdict, ProposerError> {
        self.counters.bump(CallKind::ReflectSchema);
        let prompt = self.templates.render(
            "reflect",
            &[
                ("state", state_text),
                ("schema", &schema.to_text()),
                ("action", action.unwrap_or("(initial state)")),
            ],
        )?;
        self.ask_parsed("verdict", prompt, &[], 0.0, format!("reflect-{key:016x}-{attempt}"), parse_verdict)
    }

    fn verify_local(&self, parent: &Bundle, child: &Bundle, action_text: &str) -> Result<Verdict, ProposerError> {
        self.counters.bump(CallKind::VerifyLocal);
        let prompt = self.templates.render(
            "local_check",
            &[
                ("domain", &self.domain_text),
                ("parent_state", &Self::state_with_schema(parent)),
                ("child_state", &Self::state_with_schema(child)),
                ("action", action_text),
            ],
        )?;
        self.ask_parsed("verdict", prompt, &[parent, child], 0.0, format!("local-{:016x}", child.key), parse_verdict)
    }

    fn verify_global(&self, _init: &Bundle, child: &Bundle, goal: &Bundle) -> Result<Verdict, ProposerError> {
        self.counters.bump(CallKind::VerifyGlobal);
        let prompt = self.templates.render(
            "global_check",
            &[
                ("domain", &self.domain_text),
                ("instance", &self.instance_text),
                ("path", &numbered(&child.path)),
                ("state", &child.state_text),
                ("goal", &goal.state_text),
            ],
        )?;
        self.ask_parsed("verdict", prompt, &[child, goal], 0.0, format!("global-{:016x}", child.key), parse_verdict)
    }

    fn check_goal(&self, node: &Bundle, goal: &Bundle) -> Result<bool, ProposerError> {
        self.counters.bump(CallKind::CheckGoal);
        let prompt = self
            .templates
            .render("goal_check", &[("state", &node.state_text), ("goal", &goal.state_text)])?;
        self.ask_parsed("goal answer", prompt, &[node, goal], 0.0, format!("goal-{:016x}", node.key), |t| {
            let a = field(t, "GOAL:")?.to_ascii_uppercase();
            if a.starts_with("YES") {
                Some(true)
            } else if a.starts_with("NO") {
                Some(false)
            } else {
                None
            }
        })
    }

    fn rank_states(&self, candidates: &[&Bundle], goal: &Bundle) -> Result<Vec<usize>, ProposerError> {
        self.counters.bump(CallKind::RankStates);
        if candidates.is_empty() {
            return Err(ProposerError::EmptyCandidates);
        }
        let listing: String = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| format!("Candidate {}:\n{}\n", i + 1, c.state_text))
            .collect();
        let prompt = self
            .templates
            .render("rank_states", &[("goal", &goal.state_text), ("candidates", &listing)])?;
        let n = candidates.len();
        let key = candidates.iter().map(|c| c.id).min().unwrap_or(0);
        self.ask_parsed("ranking", prompt, candidates, 0.0, format!("rank-{key}"), |t| parse_ranking(t, n))
    }

    fn counters(&self) -> &CallCounters {
        &self.counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        assert_eq!(parse_verdict("VERDICT: PASS\nCRITIQUE: none").unwrap(), Verdict { pass: true, critique: "none".into() });
        let v = parse_verdict("**Verdict:** fail\nCritique: block a floats").unwrap();
        assert!(!v.pass);
        assert_eq!(v.critique, "block a floats");
        assert!(!parse_verdict("VERDICT: FAIL").unwrap().critique.is_empty());
        assert!(parse_verdict("looks fine to me").is_none());
    }

    #[test]
    fn rankings() {
        assert_eq!(parse_ranking("RANKING: 2, 3, 1", 3), Some(vec![1, 2, 0]));
        assert_eq!(parse_ranking("RANKING: 3", 3), Some(vec![2, 0, 1]));
        assert_eq!(parse_ranking("RANKING: 1, 1", 3), None);
        assert_eq!(parse_ranking("RANKING: 4", 3), None);
        assert_eq!(parse_ranking("no idea", 3), None);
    }

    #[test]
    fn proposals() {
        let p = parse_proposal(
            "ACTION: pick up block a\nNEXT STATE:\nthe hand is holding block a.\nblock b is clear.\nRATIONALE: a must move first",
        )
        .unwrap();
        assert_eq!(p.action_text, "pick up block a");
        assert_eq!(p.next_state_text, "the hand is holding block a.\nblock b is clear.\n");
        assert_eq!(p.rationale, "a must move first");
        assert!(parse_proposal("I would pick up a").is_none());
    }

    #[test]
    fn schema_lines_are_extracted_from_chatter() {
        let reply = "Sure!\n```\ntitle t\ncanvas 2x2\nobject a shape=square color=red size=1x1 pos=at(0,0) status=- label=a\n```\nHope that helps.";
        let s = extract_schema(reply);
        assert_eq!(s.lines().count(), 3);
        assert!(DiagramSchema::parse(&s).is_ok());
    }
}
