use std::collections::BTreeMap;
use std::fmt::Write;

use super::{fmt_num, parse_size, quote, split_words, DiagramError, DiagramSchema, Shape};
use crate::pddl::{DomainDef, ProblemDef, OBJECT};
use crate::sim::DomainId;

#[derive(Debug, Clone, PartialEq)]
pub struct TypeStyle {
    pub shape: Shape,
    pub color: String,
    pub size: (f64, f64),
}

/// What a true status atom does to the object at its argument position.
#[derive(Debug, Clone, PartialEq)]
pub enum StatusStyle {
    /// Replace the base color.
    Color(String),
    /// Replace the base color by the name of another argument
    /// (`painted ?t ?c` colors the tile with `?c`).
    ColorFromArg(usize),
    /// Append a badge; `$k` expands to argument `k`.
    Badge(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatusRule {
    pub predicate: String,
    pub arg: usize,
    pub style: StatusStyle,
}

/// Visual vocabulary for a domain: per-type base styles, status overrides
/// and legend lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StyleMap {
    pub types: BTreeMap<String, TypeStyle>,
    pub statuses: Vec<StatusRule>,
    pub legend: Vec<String>,
}

const BLOCKSWORLD: &str = "\
type block shape=square color=blue size=1x1
status holding@0 badge=held
";

const PARKING: &str = "\
type curb shape=rectangle color=gray size=2.5x0.5
type car shape=rectangle color=teal size=1x1
status behind-car@0 badge=double-parked
status behind-car@0 color=orange
";

const TETRIS: &str = "\
type position shape=square color=white size=1x1
type one-square shape=label-only color=black size=0x0
type two-straight shape=label-only color=black size=0x0
type right-l shape=label-only color=black size=0x0
type piece shape=label-only color=black size=0x0
status at-square@1 color=red
status at-two@1 color=blue
status at-two@2 color=blue
status at-l@1 color=green
status at-l@2 color=green
status at-l@3 color=green
";

const FLOORTILE: &str = "\
type tile shape=square color=gray size=1x1
type robot shape=label-only color=black size=0x0
type color shape=label-only color=black size=0x0
status painted@0 color=$1
status robot-has@0 badge=\"has $1\"
status available-color@0 badge=available
";

const ELEVATOR: &str = "\
type floor shape=rectangle color=gray size=3x1
type elevator shape=square color=yellow size=1x1
type slow-elevator shape=square color=yellow size=1x1
type fast-elevator shape=square color=orange size=1x1
type passenger shape=label-only color=black size=0x0
type count shape=label-only color=black size=0x0
status passenger-at@0 badge=\"waiting at $1\"
status boarded@0 badge=\"boarded $1\"
status passengers@0 badge=\"load $1\"
status passenger-at@0 color=red
status boarded@0 color=green
";

const BARMAN: &str = "\
type shot shape=rectangle color=white size=0.8x1.2
type shaker shape=rectangle color=gray size=1x1.6
type hand shape=circle color=pink size=1x1
type level shape=label-only color=black size=0x0
type dispenser shape=label-only color=black size=0x0
type ingredient shape=label-only color=black size=0x0
type cocktail shape=label-only color=black size=0x0
type beverage shape=label-only color=black size=0x0
type container shape=rectangle color=white size=1x1.6
status contains@0 badge=\"contains $1\"
status used@0 badge=\"used $1\"
status clean@0 color=white
status used@0 color=brown
status shaker-level@0 badge=\"level $1\"
status shaked@0 badge=shaken
status handempty@0 badge=free
";

impl StyleMap {
    pub fn default_for(id: DomainId) -> StyleMap {
        let text = match id {
            DomainId::Blocksworld => BLOCKSWORLD,
            DomainId::Parking => PARKING,
            DomainId::Tetris => TETRIS,
            DomainId::Floortile => FLOORTILE,
            DomainId::Elevator => ELEVATOR,
            DomainId::Barman => BARMAN,
        };
        StyleMap::parse(text).expect("built-in style maps parse")
    }

    /// Fallback for domains without a built-in map: one palette color per
    /// declared type, no status rules.
    pub fn generic(domain: &DomainDef) -> StyleMap {
        let mut types = BTreeMap::new();
        let names: Vec<&String> = domain.types.keys().collect();
        let colors = ["blue", "red", "green", "orange", "purple", "teal", "pink", "brown", "yellow"];
        types.insert(
            OBJECT.to_string(),
            TypeStyle {
                shape: Shape::Square,
                color: "gray".into(),
                size: (1.0, 1.0),
            },
        );
        for (i, t) in names.into_iter().enumerate() {
            types.insert(
                t.clone(),
                TypeStyle {
                    shape: Shape::Square,
                    color: colors[i % colors.len()].into(),
                    size: (1.0, 1.0),
                },
            );
        }
        StyleMap {
            types,
            ..StyleMap::default()
        }
    }

    pub fn parse(text: &str) -> Result<StyleMap, DiagramError> {
        let mut map = StyleMap::default();
        for (n, raw) in text.lines().enumerate() {
            let err = |msg: String| DiagramError::Style { line: n + 1, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words = split_words(line).map_err(err)?;
            match words[0].as_str() {
                "type" => {
                    let name = words.get(1).ok_or_else(|| err("type without name".into()))?;
                    let mut shape = None;
                    let mut color = None;
                    let mut size = None;
                    for w in &words[2..] {
                        match w.split_once('=') {
                            Some(("shape", v)) => shape = Shape::parse(v),
                            Some(("color", v)) => color = Some(v.to_string()),
                            Some(("size", v)) => size = parse_size(v),
                            _ => return Err(err(format!("unexpected `{w}`"))),
                        }
                    }
                    let style = TypeStyle {
                        shape: shape.ok_or_else(|| err("missing or unknown shape".into()))?,
                        color: color.ok_or_else(|| err("missing color".into()))?,
                        size: size.ok_or_else(|| err("missing or bad size".into()))?,
                    };
                    map.types.insert(name.clone(), style);
                }
                "status" => {
                    let head = words.get(1).ok_or_else(|| err("status without predicate".into()))?;
                    let (predicate, arg) = head
                        .split_once('@')
                        .and_then(|(p, a)| Some((p.to_string(), a.parse().ok()?)))
                        .ok_or_else(|| err(format!("expected <predicate>@<arg>, got `{head}`")))?;
                    let style = match words.get(2).and_then(|w| w.split_once('=')) {
                        Some(("color", v)) => match v.strip_prefix('$') {
                            Some(k) => StatusStyle::ColorFromArg(
                                k.parse().map_err(|_| err(format!("bad argument reference `{v}`")))?,
                            ),
                            None => StatusStyle::Color(v.to_string()),
                        },
                        Some(("badge", v)) => StatusStyle::Badge(v.to_string()),
                        _ => return Err(err("status needs color=... or badge=...".into())),
                    };
                    map.statuses.push(StatusRule { predicate, arg, style });
                }
                "legend" => map.legend.push(words[1..].join(" ")),
                other => return Err(err(format!("unknown statement `{other}`"))),
            }
        }
        Ok(map)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, st) in &self.types {
            let _ = writeln!(
                s,
                "type {t} shape={} color={} size={}x{}",
                st.shape.as_str(),
                quote(&st.color),
                fmt_num(st.size.0),
                fmt_num(st.size.1)
            );
        }
        for r in &self.statuses {
            let v = match &r.style {
                StatusStyle::Color(c) => format!("color={}", quote(c)),
                StatusStyle::ColorFromArg(k) => format!("color=${k}"),
                StatusStyle::Badge(b) => format!("badge={}", quote(b)),
            };
            let _ = writeln!(s, "status {}@{} {v}", r.predicate, r.arg);
        }
        for l in &self.legend {
            let _ = writeln!(s, "legend {}", quote(l));
        }
        s
    }

    /// Style for an object type, falling back along the type hierarchy.
    pub fn type_style(&self, domain: &DomainDef, ty: &str) -> Option<&TypeStyle> {
        let mut cur = ty;
        for _ in 0..=domain.types.len() + 1 {
            if let Some(s) = self.types.get(cur) {
                return Some(s);
            }
            cur = domain.types.get(cur).map(String::as_str).unwrap_or(OBJECT);
            if cur == OBJECT {
                return self.types.get(OBJECT);
            }
        }
        None
    }

    /// Every object type used by the problem must resolve to a style and
    /// every status rule must name a declared predicate with a valid
    /// argument index.
    pub fn check(&self, domain: &DomainDef, problem: &ProblemDef) -> Result<(), DiagramError> {
        for ty in problem.objects.values() {
            if self.type_style(domain, ty).is_none() {
                return Err(DiagramError::UncoveredType(ty.clone()));
            }
        }
        for (i, r) in self.statuses.iter().enumerate() {
            let bad = |msg: String| DiagramError::Style { line: i + 1, msg };
            let p = domain
                .predicate(&r.predicate)
                .ok_or_else(|| bad(format!("undeclared predicate `{}`", r.predicate)))?;
            let max = match &r.style {
                StatusStyle::ColorFromArg(k) => r.arg.max(*k),
                _ => r.arg,
            };
            if max >= p.arity() {
                return Err(bad(format!("argument index out of range for `{}`", r.predicate)));
            }
        }
        Ok(())
    }

    /// Derive a style map from a reference schema: each object type takes
    /// the shape, color and size of its first object in the schema. Status
    /// rules and legend come from `base`.
    pub fn from_schema(schema: &DiagramSchema, problem: &ProblemDef, base: &StyleMap) -> StyleMap {
        let mut out = base.clone();
        let mut seen = std::collections::BTreeSet::new();
        for o in &schema.objects {
            let Some(ty) = problem.objects.get(&o.id) else { continue };
            if seen.insert(ty.clone()) {
                out.types.insert(
                    ty.clone(),
                    TypeStyle {
                        shape: o.shape,
                        color: o.color.clone(),
                        size: o.size,
                    },
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_maps_round_trip_and_cover_their_domains() {
        for id in DomainId::ALL {
            let m = StyleMap::default_for(id);
            assert_eq!(StyleMap::parse(&m.to_text()).unwrap(), m);
            let domain = id.domain();
            for ty in domain.types.keys() {
                assert!(m.type_style(&domain, ty).is_some(), "{id}: {ty}");
            }
            for r in &m.statuses {
                assert!(domain.predicate(&r.predicate).is_some(), "{id}: {}", r.predicate);
            }
        }
    }

    #[test]
    fn status_parsing() {
        let m = StyleMap::parse("status painted@0 color=$1\nstatus holding@0 badge=\"held by $0\"").unwrap();
        assert_eq!(m.statuses[0].style, StatusStyle::ColorFromArg(1));
        assert_eq!(m.statuses[1].style, StatusStyle::Badge("held by $0".into()));
        assert!(StyleMap::parse("status painted color=red").is_err());
        assert!(StyleMap::parse("type block shape=blob color=red size=1x1").is_err());
    }
}
