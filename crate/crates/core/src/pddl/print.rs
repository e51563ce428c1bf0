//! PDDL text output. Printing then re-parsing yields a structurally equal
//! definition.

use std::fmt::{self, Write};

use super::model::*;

fn typed_params(out: &mut String, params: &[TypedParam], var: bool) {
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let prefix = if var { "?" } else { "" };
        let _ = write!(out, "{prefix}{} - {}", p.name, p.ty);
    }
}

fn template_text(t: &AtomTemplate, params: &[TypedParam]) -> String {
    let mut s = format!("({}", t.predicate);
    for &i in &t.args {
        s.push_str(" ?");
        s.push_str(&params[i].name);
    }
    s.push(')');
    s
}

fn conjunction(parts: Vec<String>) -> String {
    match parts.len() {
        0 => "(and)".to_string(),
        1 => parts.into_iter().next().unwrap(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

impl fmt::Display for DomainDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.type_order.is_empty() {
            let types: Vec<String> = self
                .type_order
                .iter()
                .map(|t| format!("{t} - {}", self.types[t]))
                .collect();
            writeln!(f, "  (:types {})", types.join(" "))?;
        }
        writeln!(f, "  (:predicates")?;
        for p in &self.predicates {
            let mut s = String::new();
            typed_params(&mut s, &p.params, true);
            if s.is_empty() {
                writeln!(f, "    ({})", p.name)?;
            } else {
                writeln!(f, "    ({} {s})", p.name)?;
            }
        }
        write!(f, "  )")?;
        for a in &self.actions {
            let mut params = String::new();
            typed_params(&mut params, &a.params, true);
            let pre = a
                .pre_pos
                .iter()
                .map(|t| template_text(t, &a.params))
                .chain(a.pre_neg.iter().map(|t| format!("(not {})", template_text(t, &a.params))))
                .collect();
            let eff = a
                .add
                .iter()
                .map(|t| template_text(t, &a.params))
                .chain(a.del.iter().map(|t| format!("(not {})", template_text(t, &a.params))))
                .collect();
            write!(
                f,
                "\n  (:action {}\n    :parameters ({params})\n    :precondition {}\n    :effect {})",
                a.name,
                conjunction(pre),
                conjunction(eff)
            )?;
        }
        writeln!(f, ")")
    }
}

impl fmt::Display for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain_name)?;
        write!(f, "  (:objects")?;
        for (o, t) in &self.objects {
            write!(f, " {o} - {t}")?;
        }
        writeln!(f, ")")?;
        writeln!(f, "  (:init")?;
        for a in &self.init.atoms {
            writeln!(f, "    {a}")?;
        }
        writeln!(f, "  )")?;
        let goal: Vec<String> = self
            .goal_pos
            .iter()
            .map(|a| a.to_string())
            .chain(self.goal_neg.iter().map(|a| format!("(not {a})")))
            .collect();
        writeln!(f, "  (:goal {}))", conjunction(goal))
    }
}
