use std::collections::{BTreeMap, BTreeSet};

use super::{
    check_schema, layout, relation_hops, DiagramError, DiagramSchema, ObjectSpec, Position, Relation,
    StatusStyle, StyleMap,
};
use crate::pddl::{DomainDef, GroundAtom, ProblemDef, State};
use crate::sim::DomainId;

/// Sort key that orders `curb2` before `curb10`.
fn natural_key(s: &str) -> (String, u64, String) {
    let start = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
    let end = s[start..]
        .find(|c: char| !c.is_ascii_digit())
        .map_or(s.len(), |e| start + e);
    let n = s[start..end].parse().unwrap_or(0);
    (s[..start].to_string(), n, s.to_string())
}

fn sorted<'a>(mut v: Vec<&'a str>) -> Vec<&'a str> {
    v.sort_by_key(|s| natural_key(s));
    v
}

/// First two integer runs of a name: `tile_2-3` and `f2-3f` give (2, 3).
fn grid_coords(name: &str) -> Option<(usize, usize)> {
    let nums: Vec<usize> = name
        .split(|c: char| !c.is_ascii_digit())
        .filter(|p| !p.is_empty())
        .filter_map(|p| p.parse().ok())
        .collect();
    (nums.len() >= 2).then(|| (nums[0], nums[1]))
}

fn at(x: f64, y: f64) -> Position {
    Position::Absolute { x, y }
}

fn rel(relation: Relation, target: &str, gap: f64) -> Position {
    Position::Relative {
        relation,
        target: target.to_string(),
        gap,
    }
}

struct Facts<'a> {
    by_pred: BTreeMap<&'a str, Vec<&'a GroundAtom>>,
}

impl<'a> Facts<'a> {
    fn new(state: &'a State) -> Self {
        let mut by_pred: BTreeMap<&str, Vec<&GroundAtom>> = BTreeMap::new();
        for a in &state.atoms {
            by_pred.entry(a.predicate.as_str()).or_default().push(a);
        }
        Facts { by_pred }
    }

    fn all(&self, pred: &str) -> impl Iterator<Item = &'a GroundAtom> + '_ {
        self.by_pred.get(pred).into_iter().flatten().copied()
    }

    /// First atom of `pred` whose argument 0 is `obj`.
    fn first(&self, pred: &str, obj: &str) -> Option<&'a GroundAtom> {
        self.all(pred).find(|a| a.args.first().map(String::as_str) == Some(obj))
    }

    fn holds(&self, pred: &str, obj: &str) -> bool {
        self.first(pred, obj).is_some()
    }
}

type Placement = Vec<(String, Position)>;

fn blocksworld(problem: &ProblemDef, domain: &DomainDef, facts: &Facts) -> Placement {
    let blocks = sorted(problem.objects_of(domain, "block").collect());
    let n = blocks.len() as f64;
    let support: BTreeMap<&str, &str> = facts
        .all("on")
        .filter(|a| a.args.len() == 2)
        .map(|a| (a.args[0].as_str(), a.args[1].as_str()))
        .collect();
    // A block whose support chain never reaches the table is placed loose.
    let grounded = |b: &str| {
        let mut cur = b;
        for _ in 0..=blocks.len() {
            match support.get(cur) {
                Some(&next) => cur = next,
                None => return facts.holds("ontable", cur),
            }
        }
        false
    };
    let mut out = Vec::new();
    for (i, &b) in blocks.iter().enumerate() {
        let x = 2.0 * i as f64;
        let pos = if facts.holds("holding", b) {
            at(2.0 * n, 0.0)
        } else if let (Some(&s), true) = (support.get(b), grounded(b)) {
            rel(Relation::Above, s, 0.0)
        } else if facts.holds("ontable", b) {
            at(x, 0.0)
        } else {
            at(x, n + 1.0)
        };
        out.push((b.to_string(), pos));
    }
    out
}

fn parking(problem: &ProblemDef, domain: &DomainDef, facts: &Facts) -> Placement {
    let curbs = sorted(problem.objects_of(domain, "curb").collect());
    let cars = sorted(problem.objects_of(domain, "car").collect());
    let mut out: Placement = curbs
        .iter()
        .enumerate()
        .map(|(i, c)| (c.to_string(), at(3.0 * i as f64, 0.0)))
        .collect();
    for (i, &car) in cars.iter().enumerate() {
        let pos = if let Some(a) = facts.first("at-curb-num", car) {
            rel(Relation::Above, &a.args[1], 0.25)
        } else if let Some(a) = facts.first("behind-car", car) {
            rel(Relation::RightOf, &a.args[1], 0.25)
        } else {
            at(1.5 * i as f64, 3.0)
        };
        out.push((car.to_string(), pos));
    }
    out
}

fn grid_objects(names: &[&str]) -> (Placement, Vec<String>, f64) {
    let mut out = Vec::new();
    let mut loose = Vec::new();
    let mut top: f64 = 0.0;
    for &p in names {
        match grid_coords(p) {
            Some((r, c)) => {
                out.push((p.to_string(), at(c as f64, r as f64)));
                top = top.max(r as f64 + 1.0);
            }
            None => loose.push(p.to_string()),
        }
    }
    (out, loose, top)
}

fn tetris(problem: &ProblemDef, domain: &DomainDef, facts: &Facts) -> Placement {
    let cells = sorted(problem.objects_of(domain, "position").collect());
    let (mut out, loose, top) = grid_objects(&cells);
    for (i, p) in loose.into_iter().enumerate() {
        out.push((p, at(1.5 * i as f64, top + 1.0)));
    }
    let pieces = sorted(problem.objects_of(domain, "piece").collect());
    for (i, &piece) in pieces.iter().enumerate() {
        let anchor = facts
            .first("at-square", piece)
            .map(|a| a.args[1].clone())
            .or_else(|| facts.first("at-two", piece).map(|a| a.args[1].clone()))
            .or_else(|| facts.first("at-l", piece).map(|a| a.args[3].clone()));
        let pos = match anchor {
            Some(cell) => rel(Relation::Inside, &cell, 0.0),
            None => at(1.5 * i as f64 + 0.5, top + 2.5),
        };
        out.push((piece.to_string(), pos));
    }
    out
}

fn floortile(problem: &ProblemDef, domain: &DomainDef, facts: &Facts) -> Placement {
    let tiles = sorted(problem.objects_of(domain, "tile").collect());
    let (mut out, loose, top) = grid_objects(&tiles);
    for (i, t) in loose.into_iter().enumerate() {
        out.push((t, at(1.5 * i as f64, top + 2.0)));
    }
    for (i, &r) in sorted(problem.objects_of(domain, "robot").collect()).iter().enumerate() {
        let pos = match facts.first("robot-at", r) {
            Some(a) => rel(Relation::Inside, &a.args[1], 0.0),
            None => at(1.5 * i as f64 + 0.5, top + 3.5),
        };
        out.push((r.to_string(), pos));
    }
    for (i, &c) in sorted(problem.objects_of(domain, "color").collect()).iter().enumerate() {
        out.push((c.to_string(), at(2.0 * i as f64 + 0.5, top + 0.5)));
    }
    out
}

fn elevator(problem: &ProblemDef, domain: &DomainDef, facts: &Facts) -> Placement {
    let mut out = Vec::new();
    for (i, &n) in sorted(problem.objects_of(domain, "count").collect()).iter().enumerate() {
        out.push((n.to_string(), at(1.5 * i as f64 + 0.5, 0.5)));
    }
    let floors = sorted(problem.objects_of(domain, "floor").collect());
    for (i, &f) in floors.iter().enumerate() {
        out.push((f.to_string(), at(0.0, 2.0 + 2.0 * i as f64)));
    }
    let lifts = sorted(problem.objects_of(domain, "elevator").collect());
    let top = 2.0 + 2.0 * floors.len() as f64;
    for (k, &e) in lifts.iter().enumerate() {
        let pos = match facts.first("lift-at", e) {
            Some(a) => rel(Relation::RightOf, &a.args[1], 0.5 + 1.5 * k as f64),
            None => at(3.5 + 1.5 * k as f64, top),
        };
        out.push((e.to_string(), pos));
    }
    for (i, &p) in sorted(problem.objects_of(domain, "passenger").collect()).iter().enumerate() {
        let pos = if let Some(a) = facts.first("boarded", p) {
            rel(Relation::Inside, &a.args[1], 0.0)
        } else if let Some(a) = facts.first("passenger-at", p) {
            rel(Relation::Inside, &a.args[1], 0.0)
        } else {
            at(1.5 * i as f64 + 0.5, top + 1.5)
        };
        out.push((p.to_string(), pos));
    }
    out
}

fn barman(problem: &ProblemDef, domain: &DomainDef, facts: &Facts) -> Placement {
    let mut out = Vec::new();
    let hands = sorted(problem.objects_of(domain, "hand").collect());
    for (i, &h) in hands.iter().enumerate() {
        out.push((h.to_string(), at(4.0 * i as f64 + 1.0, 4.0)));
    }
    let containers = sorted(problem.objects_of(domain, "container").collect());
    let held: BTreeMap<&str, &str> = facts
        .all("holding")
        .filter(|a| a.args.len() == 2)
        .map(|a| (a.args[1].as_str(), a.args[0].as_str()))
        .collect();
    for (i, &c) in containers.iter().enumerate() {
        let pos = if let Some(h) = held.get(c) {
            rel(Relation::Below, h, 0.2)
        } else if facts.holds("ontable", c) {
            at(2.0 * i as f64, 0.0)
        } else {
            at(2.0 * i as f64, 8.0)
        };
        out.push((c.to_string(), pos));
    }
    let placed: BTreeSet<String> = out.iter().map(|(id, _)| id.clone()).collect();
    let rest = sorted(
        problem
            .objects
            .keys()
            .map(String::as_str)
            .filter(|o| !placed.contains(*o))
            .collect(),
    );
    for (j, &o) in rest.iter().enumerate() {
        out.push((o.to_string(), at(2.0 * j as f64 + 0.5, 6.5)));
    }
    out
}

/// Deterministic diagram schema for a state: one object per problem object,
/// placed by the domain's layout rules and styled by `style`.
pub fn schema_from_state(
    state: &State,
    problem: &ProblemDef,
    domain: &DomainDef,
    style: &StyleMap,
) -> Result<DiagramSchema, DiagramError> {
    style.check(domain, problem)?;
    let facts = Facts::new(state);
    let mut placement = match DomainId::from_domain_name(&domain.name) {
        Some(DomainId::Blocksworld) => blocksworld(problem, domain, &facts),
        Some(DomainId::Parking) => parking(problem, domain, &facts),
        Some(DomainId::Tetris) => tetris(problem, domain, &facts),
        Some(DomainId::Floortile) => floortile(problem, domain, &facts),
        Some(DomainId::Elevator) => elevator(problem, domain, &facts),
        Some(DomainId::Barman) => barman(problem, domain, &facts),
        None => Vec::new(),
    };
    // Anything a rule did not place goes into a row above everything else.
    let placed: BTreeSet<String> = placement.iter().map(|(id, _)| id.clone()).collect();
    let leftover = sorted(
        problem
            .objects
            .keys()
            .map(String::as_str)
            .filter(|o| !placed.contains(*o))
            .collect(),
    );
    let row = if placement.is_empty() { 0.0 } else { 12.0 };
    for (i, &o) in leftover.iter().enumerate() {
        placement.push((o.to_string(), at(2.0 * i as f64, row)));
    }

    let mut objects = Vec::with_capacity(placement.len());
    for (id, position) in placement {
        let ty = &problem.objects[&id];
        let ts = style
            .type_style(domain, ty)
            .ok_or_else(|| DiagramError::UncoveredType(ty.clone()))?;
        let mut color = ts.color.clone();
        let mut badges: Vec<String> = Vec::new();
        for rule in &style.statuses {
            for a in facts.all(&rule.predicate) {
                if a.args.get(rule.arg) != Some(&id) {
                    continue;
                }
                match &rule.style {
                    StatusStyle::Color(c) => color = c.clone(),
                    StatusStyle::ColorFromArg(k) => {
                        if let Some(c) = a.args.get(*k) {
                            color = c.clone();
                        }
                    }
                    StatusStyle::Badge(b) => {
                        let mut text = b.clone();
                        for (k, v) in a.args.iter().enumerate().rev() {
                            text = text.replace(&format!("${k}"), v);
                        }
                        badges.push(text);
                    }
                }
            }
        }
        objects.push(ObjectSpec {
            label: id.clone(),
            id,
            shape: ts.shape,
            color,
            size: ts.size,
            position,
            status: (!badges.is_empty()).then(|| badges.join("; ")),
        });
    }

    let mut schema = DiagramSchema {
        title: format!("{} state", problem.name),
        canvas: (1.0, 1.0),
        objects,
    };
    // Fit the canvas to the resolved layout; a cyclic layout keeps the
    // default canvas and is reported by layout/render.
    if let Ok(l) = layout(&schema) {
        let (mut w, mut h) = (1.0f64, 1.0f64);
        for (_, b) in &l.boxes {
            w = w.max(b.x + b.w + 0.5);
            h = h.max(b.y + b.h + 0.5);
        }
        schema.canvas = (w.ceil(), h.ceil());
    }
    Ok(schema)
}

/// Oracle ranking of candidate schemas: fewest violations, then fewest
/// relation hops, ties by candidate index.
pub fn oracle_schema_order<S: AsRef<str>>(candidates: &[DiagramSchema], expected_objects: &[S]) -> Vec<usize> {
    let mut keyed: Vec<(usize, usize, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, s)| (check_schema(s, expected_objects).len(), relation_hops(s), i))
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, _, i)| i).collect()
}
