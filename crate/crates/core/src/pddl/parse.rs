use std::collections::{BTreeMap, BTreeSet};

use super::model::*;
use super::sexpr::{parse_one, syntax_error, Sexp};
use super::{PddlError, SUPPORTED_REQUIREMENTS};

type Result<T> = std::result::Result<T, PddlError>;

fn expect_list<'a>(e: &'a Sexp, what: &str) -> Result<&'a [Sexp]> {
    e.as_list()
        .ok_or_else(|| syntax_error(e.pos(), format!("expected a list for {what}")))
}

fn expect_symbol<'a>(e: &'a Sexp, what: &str) -> Result<&'a str> {
    e.as_symbol()
        .ok_or_else(|| syntax_error(e.pos(), format!("expected a symbol for {what}")))
}

/// Split `(define (<kind> <name>) sections...)` into name and sections.
fn define_header<'a>(root: &'a Sexp, kind: &str) -> Result<(String, &'a [Sexp])> {
    let items = expect_list(root, "define")?;
    if root.head() != Some("define") {
        return Err(syntax_error(root.pos(), "expected `(define ...)`"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax_error(root.pos(), format!("missing `({kind} <name>)`")))?;
    let h = expect_list(header, kind)?;
    if header.head() != Some(kind) || h.len() != 2 {
        return Err(syntax_error(header.pos(), format!("expected `({kind} <name>)`")));
    }
    let name = expect_symbol(&h[1], "name")?.to_string();
    Ok((name, &items[2..]))
}

/// Parse a typed list such as `a b - t c` into (name, type) pairs. Untyped
/// trailing names get type `object`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String, super::sexpr::Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, super::sexpr::Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let e = &items[i];
        match e {
            Sexp::Symbol(s, pos) if s == "-" => {
                let ty_e = items
                    .get(i + 1)
                    .ok_or_else(|| syntax_error(*pos, "`-` must be followed by a type"))?;
                if ty_e.head() == Some("either") {
                    return Err(PddlError::Unsupported("`either` types".into()));
                }
                let ty = expect_symbol(ty_e, "type")?;
                if pending.is_empty() {
                    return Err(syntax_error(*pos, "`-` without preceding names"));
                }
                for (n, p) in pending.drain(..) {
                    out.push((n, ty.to_string(), p));
                }
                i += 2;
            }
            Sexp::Symbol(s, pos) => {
                pending.push((s.clone(), *pos));
                i += 1;
            }
            Sexp::List(_, pos) => return Err(syntax_error(*pos, "unexpected list in typed list")),
        }
    }
    for (n, p) in pending {
        out.push((n, OBJECT.to_string(), p));
    }
    Ok(out)
}

fn params_list(e: &Sexp, domain: &DomainDef) -> Result<Vec<TypedParam>> {
    let items = expect_list(e, "parameters")?;
    let mut params: Vec<TypedParam> = Vec::new();
    for (name, ty, pos) in typed_list(items)? {
        let name = name
            .strip_prefix('?')
            .ok_or_else(|| syntax_error(pos, format!("parameter `{name}` must start with `?`")))?
            .to_string();
        if !domain.has_type(&ty) {
            return Err(PddlError::UndeclaredType(ty));
        }
        if params.iter().any(|p| p.name == name) {
            return Err(PddlError::Duplicate {
                kind: "parameter",
                name,
            });
        }
        params.push(TypedParam { name, ty });
    }
    Ok(params)
}

pub fn parse_domain(text: &str) -> Result<DomainDef> {
    let root = parse_one(text)?;
    let (name, sections) = define_header(&root, "domain")?;
    let mut domain = DomainDef {
        name,
        requirements: Vec::new(),
        types: BTreeMap::new(),
        type_order: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    let mut typing = false;
    for sec in sections {
        let items = expect_list(sec, "domain section")?;
        match sec.head() {
            Some(":requirements") => {
                for r in &items[1..] {
                    let r = expect_symbol(r, "requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(PddlError::UnsupportedRequirement(r.to_string()));
                    }
                    typing |= r == ":typing";
                    domain.requirements.push(r.to_string());
                }
            }
            Some(":types") => {
                if !typing {
                    return Err(PddlError::Unsupported(
                        "`:types` without the :typing requirement".into(),
                    ));
                }
                parse_types(&items[1..], &mut domain)?;
            }
            Some(":predicates") => {
                for p in &items[1..] {
                    let pi = expect_list(p, "predicate")?;
                    let pname = pi
                        .first()
                        .ok_or_else(|| syntax_error(p.pos(), "empty predicate"))
                        .and_then(|s| expect_symbol(s, "predicate name"))?
                        .to_string();
                    if domain.predicate(&pname).is_some() {
                        return Err(PddlError::Duplicate {
                            kind: "predicate",
                            name: pname,
                        });
                    }
                    let params = params_list(&Sexp::List(pi[1..].to_vec(), p.pos()), &domain)?;
                    domain.predicates.push(PredicateDef {
                        name: pname,
                        params,
                    });
                }
            }
            Some(":action") => {
                let action = parse_action(sec, &domain)?;
                if domain.action(&action.name).is_some() {
                    return Err(PddlError::Duplicate {
                        kind: "action",
                        name: action.name,
                    });
                }
                domain.actions.push(action);
            }
            Some(other) => return Err(PddlError::Unsupported(format!("domain section `{other}`"))),
            None => return Err(syntax_error(sec.pos(), "expected a section keyword")),
        }
    }
    Ok(domain)
}

fn parse_types(items: &[Sexp], domain: &mut DomainDef) -> Result<()> {
    let entries = typed_list(items)?;
    for (child, parent, _) in &entries {
        if child == OBJECT {
            continue;
        }
        if domain.types.contains_key(child) {
            return Err(PddlError::Duplicate {
                kind: "type",
                name: child.clone(),
            });
        }
        domain.types.insert(child.clone(), parent.clone());
        domain.type_order.push(child.clone());
    }
    // Parents named only on the right of `-` are implicitly declared.
    for (_, parent, _) in &entries {
        if parent != OBJECT && !domain.types.contains_key(parent) {
            domain.types.insert(parent.clone(), OBJECT.to_string());
            domain.type_order.push(parent.clone());
        }
    }
    for start in domain.types.keys() {
        let mut seen = BTreeSet::new();
        let mut cur = start.as_str();
        while let Some(p) = domain.types.get(cur) {
            if !seen.insert(cur) {
                return Err(PddlError::CyclicTypes(start.clone()));
            }
            cur = p;
        }
    }
    Ok(())
}

fn parse_action(sec: &Sexp, domain: &DomainDef) -> Result<ActionSchema> {
    let items = expect_list(sec, "action")?;
    let name = items
        .get(1)
        .ok_or_else(|| syntax_error(sec.pos(), "action without a name"))
        .and_then(|s| expect_symbol(s, "action name"))?
        .to_string();
    let mut schema = ActionSchema {
        name,
        params: Vec::new(),
        pre_pos: Vec::new(),
        pre_neg: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
    };
    let mut i = 2;
    while i < items.len() {
        let key = expect_symbol(&items[i], "action keyword")?;
        let val = items
            .get(i + 1)
            .ok_or_else(|| syntax_error(items[i].pos(), format!("`{key}` without a value")))?;
        match key {
            ":parameters" => schema.params = params_list(val, domain)?,
            ":precondition" => {
                let negative_ok = domain.requirements.iter().any(|r| r == ":negative-preconditions");
                for (positive, atom) in literals(val)? {
                    if !positive && !negative_ok {
                        return Err(PddlError::Unsupported(
                            "negative precondition without :negative-preconditions".into(),
                        ));
                    }
                    let t = template(atom, &schema, domain)?;
                    let list = if positive { &mut schema.pre_pos } else { &mut schema.pre_neg };
                    if !list.contains(&t) {
                        list.push(t);
                    }
                }
            }
            ":effect" => {
                for (positive, atom) in literals(val)? {
                    let t = template(atom, &schema, domain)?;
                    let list = if positive { &mut schema.add } else { &mut schema.del };
                    if !list.contains(&t) {
                        list.push(t);
                    }
                }
            }
            other => return Err(PddlError::Unsupported(format!("action keyword `{other}`"))),
        }
        i += 2;
    }
    if let Some(t) = schema.add.iter().find(|t| schema.del.contains(t)) {
        return Err(PddlError::Contradiction(format!(
            "action `{}` both adds and deletes `{}`",
            schema.name, t.predicate
        )));
    }
    Ok(schema)
}

/// Flatten a conjunction of literals into (positive?, atom) pairs.
fn literals(e: &Sexp) -> Result<Vec<(bool, &Sexp)>> {
    let items = expect_list(e, "formula")?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    match e.head() {
        Some("and") => {
            let mut out = Vec::new();
            for sub in &items[1..] {
                out.extend(literals(sub)?);
            }
            Ok(out)
        }
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax_error(e.pos(), "`not` takes exactly one atom"));
            }
            let inner = &items[1];
            match inner.head() {
                Some(h) if is_connective(h) => {
                    Err(PddlError::Unsupported(format!("`{h}` inside `not`")))
                }
                _ => Ok(vec![(false, inner)]),
            }
        }
        Some(h) if is_connective(h) => Err(PddlError::Unsupported(format!("`{h}` formulas"))),
        Some(_) => Ok(vec![(true, e)]),
        None => Err(syntax_error(e.pos(), "expected an atom")),
    }
}

fn is_connective(h: &str) -> bool {
    matches!(
        h,
        "and" | "or" | "not" | "imply" | "exists" | "forall" | "when" | "=" | "increase" | "decrease"
    )
}

fn template(atom: &Sexp, schema: &ActionSchema, domain: &DomainDef) -> Result<AtomTemplate> {
    let items = expect_list(atom, "atom")?;
    let pname = expect_symbol(&items[0], "predicate")?;
    let pred = domain
        .predicate(pname)
        .ok_or_else(|| PddlError::UndeclaredPredicate(pname.to_string()))?;
    if pred.arity() != items.len() - 1 {
        return Err(PddlError::Arity(format!(
            "`{pname}` used with {} arguments in action `{}`, declared with {}",
            items.len() - 1,
            schema.name,
            pred.arity()
        )));
    }
    let mut args = Vec::new();
    for (a, decl) in items[1..].iter().zip(&pred.params) {
        let a = expect_symbol(a, "argument")?;
        let var = a.strip_prefix('?').ok_or_else(|| {
            PddlError::Unsupported(format!("constant `{a}` in action `{}`", schema.name))
        })?;
        let idx = schema
            .param_index(var)
            .ok_or_else(|| PddlError::UnknownVariable(var.to_string()))?;
        let pty = &schema.params[idx].ty;
        if !domain.is_subtype(pty, &decl.ty) {
            return Err(PddlError::TypeMismatch(format!(
                "`?{var}` of type `{pty}` used as `{}` in `{pname}` (action `{}`)",
                decl.ty, schema.name
            )));
        }
        args.push(idx);
    }
    Ok(AtomTemplate {
        predicate: pname.to_string(),
        args,
    })
}

fn ground_atom(e: &Sexp) -> Result<GroundAtom> {
    let items = expect_list(e, "atom")?;
    let predicate = items
        .first()
        .ok_or_else(|| syntax_error(e.pos(), "empty atom"))
        .and_then(|s| expect_symbol(s, "predicate"))?;
    if is_connective(predicate) {
        return Err(PddlError::Unsupported(format!("`{predicate}` in a ground atom")));
    }
    let args = items[1..]
        .iter()
        .map(|a| expect_symbol(a, "object").map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundAtom {
        predicate: predicate.to_string(),
        args,
    })
}

pub fn parse_problem(text: &str, domain: &DomainDef) -> Result<ProblemDef> {
    let root = parse_one(text)?;
    let (name, sections) = define_header(&root, "problem")?;
    let mut problem = ProblemDef {
        name,
        domain_name: String::new(),
        objects: BTreeMap::new(),
        init: State::default(),
        goal_pos: BTreeSet::new(),
        goal_neg: BTreeSet::new(),
    };
    let mut init_raw = Vec::new();
    let mut goal_raw = Vec::new();
    for sec in sections {
        let items = expect_list(sec, "problem section")?;
        match sec.head() {
            Some(":domain") => {
                let d = items
                    .get(1)
                    .ok_or_else(|| syntax_error(sec.pos(), "`:domain` without a name"))
                    .and_then(|s| expect_symbol(s, "domain name"))?;
                if d != domain.name {
                    return Err(PddlError::DomainMismatch {
                        expected: domain.name.clone(),
                        found: d.to_string(),
                    });
                }
                problem.domain_name = d.to_string();
            }
            Some(":objects") => {
                for (obj, ty, _) in typed_list(&items[1..])? {
                    if !domain.has_type(&ty) {
                        return Err(PddlError::UndeclaredType(ty));
                    }
                    if problem.objects.insert(obj.clone(), ty).is_some() {
                        return Err(PddlError::Duplicate {
                            kind: "object",
                            name: obj,
                        });
                    }
                }
            }
            Some(":init") => {
                for a in &items[1..] {
                    if a.head() == Some("not") {
                        return Err(PddlError::Unsupported("negative literal in `:init`".into()));
                    }
                    init_raw.push(ground_atom(a)?);
                }
            }
            Some(":goal") => {
                let g = items
                    .get(1)
                    .ok_or_else(|| syntax_error(sec.pos(), "`:goal` without a formula"))?;
                for (positive, atom) in literals(g)? {
                    goal_raw.push((positive, ground_atom(atom)?));
                }
            }
            Some(other) => return Err(PddlError::Unsupported(format!("problem section `{other}`"))),
            None => return Err(syntax_error(sec.pos(), "expected a section keyword")),
        }
    }
    if problem.domain_name.is_empty() {
        return Err(syntax_error(root.pos(), "problem has no `(:domain ...)` section"));
    }
    for a in init_raw {
        problem.check_atom(domain, &a)?;
        problem.init.atoms.insert(a);
    }
    for (positive, a) in goal_raw {
        problem.check_atom(domain, &a)?;
        if positive {
            problem.goal_pos.insert(a);
        } else {
            problem.goal_neg.insert(a);
        }
    }
    if let Some(a) = problem.goal_pos.intersection(&problem.goal_neg).next() {
        return Err(PddlError::Contradiction(format!("goal requires both {a} and its negation")));
    }
    Ok(problem)
}
