//! Conceptual diagrams: the line-oriented schema format, layout, checks,
//! deterministic SVG rendering and per-domain style maps.

mod layout;
mod render;
mod rules;
mod style;

use std::fmt::{self, Write};

use thiserror::Error;

pub use layout::{check_schema, layout, relation_hops, BBox, Layout, Violation};
pub use render::{render, RenderedDiagram, PX_PER_UNIT};
pub use rules::{oracle_schema_order, schema_from_state};
pub use style::{StatusStyle, StyleMap, TypeStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Circle,
    Square,
    Rectangle,
    Line,
    Triangle,
    LabelOnly,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Rectangle => "rectangle",
            Shape::Line => "line",
            Shape::Triangle => "triangle",
            Shape::LabelOnly => "label-only",
        }
    }

    pub fn parse(s: &str) -> Option<Shape> {
        Some(match s {
            "circle" => Shape::Circle,
            "square" => Shape::Square,
            "rectangle" => Shape::Rectangle,
            "line" => Shape::Line,
            "triangle" => Shape::Triangle,
            "label-only" => Shape::LabelOnly,
            _ => return None,
        })
    }
}

/// The named palette. Colors outside it are a check violation.
pub const PALETTE: [(&str, &str); 12] = [
    ("white", "#ffffff"),
    ("black", "#000000"),
    ("gray", "#9e9e9e"),
    ("red", "#e53935"),
    ("orange", "#fb8c00"),
    ("yellow", "#fdd835"),
    ("green", "#43a047"),
    ("teal", "#00897b"),
    ("blue", "#1e88e5"),
    ("purple", "#8e24aa"),
    ("pink", "#d81b60"),
    ("brown", "#6d4c41"),
];

pub fn palette_rgb(color: &str) -> Option<&'static str> {
    PALETTE.iter().find(|(n, _)| *n == color).map(|(_, rgb)| *rgb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Above,
    Below,
    LeftOf,
    RightOf,
    Inside,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Above => "above",
            Relation::Below => "below",
            Relation::LeftOf => "left-of",
            Relation::RightOf => "right-of",
            Relation::Inside => "inside",
        }
    }

    pub fn parse(s: &str) -> Option<Relation> {
        Some(match s {
            "above" => Relation::Above,
            "below" => Relation::Below,
            "left-of" => Relation::LeftOf,
            "right-of" => Relation::RightOf,
            "inside" => Relation::Inside,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Position {
    Absolute { x: f64, y: f64 },
    Relative { relation: Relation, target: String, gap: f64 },
}

/// One object of a diagram. Coordinates are canvas units with y pointing up.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    pub shape: Shape,
    pub color: String,
    pub size: (f64, f64),
    pub position: Position,
    pub status: Option<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramSchema {
    pub title: String,
    pub canvas: (f64, f64),
    pub objects: Vec<ObjectSpec>,
}

impl DiagramSchema {
    pub fn empty(title: &str) -> Self {
        DiagramSchema {
            title: title.to_string(),
            canvas: (1.0, 1.0),
            objects: Vec::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagramError {
    #[error("schema line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cyclic relation: {}", .0.join(" -> "))]
    CyclicRelation(Vec<String>),
    #[error("object `{id}` is positioned relative to unknown object `{target}`")]
    DanglingRelation { id: String, target: String },
    #[error("no style for object type `{0}`")]
    UncoveredType(String),
    #[error("style line {line}: {msg}")]
    Style { line: usize, msg: String },
}

/// Compact number formatting for schema text: integers without a decimal
/// point, otherwise up to three decimals.
pub fn fmt_num(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        let s = format!("{r:.3}");
        s.trim_end_matches('0').to_string()
    }
}

fn quote(s: &str) -> String {
    if !s.is_empty() && !s.contains([' ', '"', '=', '\\']) {
        s.to_string()
    } else {
        let mut q = String::from("\"");
        for c in s.chars() {
            if c == '"' || c == '\\' {
                q.push('\\');
            }
            q.push(c);
        }
        q.push('"');
        q
    }
}

/// Split a statement into words, honoring double quotes inside values
/// (`label="two words"`).
pub(crate) fn split_words(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_quote = false;
    let mut has = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' if in_quote => match chars.next() {
                Some(n) => cur.push(n),
                None => return Err("dangling escape".into()),
            },
            '"' => {
                in_quote = !in_quote;
                has = true;
            }
            c if c.is_whitespace() && !in_quote => {
                if has {
                    out.push(std::mem::take(&mut cur));
                    has = false;
                }
            }
            c => {
                cur.push(c);
                has = true;
            }
        }
    }
    if in_quote {
        return Err("unterminated quote".into());
    }
    if has {
        out.push(cur);
    }
    Ok(out)
}

pub(crate) fn parse_size(s: &str) -> Option<(f64, f64)> {
    let (w, h) = s.split_once('x')?;
    let w: f64 = w.parse().ok()?;
    let h: f64 = h.parse().ok()?;
    (w.is_finite() && h.is_finite()).then_some((w, h))
}

fn parse_position(s: &str) -> Option<Position> {
    let (head, rest) = s.split_once('(')?;
    let inner = rest.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    if head == "at" {
        let x: f64 = a.trim().parse().ok()?;
        let y: f64 = b.trim().parse().ok()?;
        return Some(Position::Absolute { x, y });
    }
    let relation = Relation::parse(head)?;
    let gap: f64 = b.trim().parse().ok()?;
    Some(Position::Relative {
        relation,
        target: a.trim().to_string(),
        gap,
    })
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Absolute { x, y } => write!(f, "at({},{})", fmt_num(*x), fmt_num(*y)),
            Position::Relative { relation, target, gap } => {
                write!(f, "{}({target},{})", relation.as_str(), fmt_num(*gap))
            }
        }
    }
}

impl ObjectSpec {
    pub fn to_line(&self) -> String {
        format!(
            "object {} shape={} color={} size={}x{} pos={} status={} label={}",
            self.id,
            self.shape.as_str(),
            quote(&self.color),
            fmt_num(self.size.0),
            fmt_num(self.size.1),
            self.position,
            self.status.as_deref().map(quote).unwrap_or_else(|| "-".into()),
            quote(&self.label)
        )
    }
}

impl DiagramSchema {
    /// The serialized statement format shared by proposers and the CLI.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "title {}", quote(&self.title));
        let _ = writeln!(s, "canvas {}x{}", fmt_num(self.canvas.0), fmt_num(self.canvas.1));
        for o in &self.objects {
            s.push_str(&o.to_line());
            s.push('\n');
        }
        s
    }

    /// Parse schema text. Lines that are blank or start with `#` are
    /// skipped; anything else must be a `title`, `canvas` or `object`
    /// statement.
    pub fn parse(text: &str) -> Result<DiagramSchema, DiagramError> {
        let mut schema = DiagramSchema::empty("");
        let mut saw_canvas = false;
        for (n, raw) in text.lines().enumerate() {
            let err = |msg: String| DiagramError::Parse { line: n + 1, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words = split_words(line).map_err(err)?;
            match words[0].as_str() {
                "title" => schema.title = words[1..].join(" "),
                "canvas" => {
                    let size = words
                        .get(1)
                        .and_then(|w| parse_size(w))
                        .filter(|&(w, h)| w > 0.0 && h > 0.0)
                        .ok_or_else(|| err("canvas must be `canvas <w>x<h>` with positive sizes".into()))?;
                    schema.canvas = size;
                    saw_canvas = true;
                }
                "object" => {
                    let spec = parse_object(&words).map_err(err)?;
                    if schema.get(&spec.id).is_some() {
                        return Err(err(format!("duplicate object id `{}`", spec.id)));
                    }
                    schema.objects.push(spec);
                }
                other => return Err(err(format!("unknown statement `{other}`"))),
            }
        }
        if !saw_canvas && schema.objects.is_empty() && schema.title.is_empty() {
            return Err(DiagramError::Parse {
                line: 0,
                msg: "no schema statements found".into(),
            });
        }
        Ok(schema)
    }
}

fn parse_object(words: &[String]) -> Result<ObjectSpec, String> {
    let id = words.get(1).ok_or("object without id")?.clone();
    if id.contains('=') {
        return Err("object without id".into());
    }
    let mut shape = None;
    let mut color = None;
    let mut size = None;
    let mut pos = None;
    let mut status = None;
    let mut label = None;
    for w in &words[2..] {
        let (k, v) = w.split_once('=').ok_or_else(|| format!("expected key=value, got `{w}`"))?;
        match k {
            "shape" => shape = Some(Shape::parse(v).ok_or_else(|| format!("unknown shape `{v}`"))?),
            "color" => color = Some(v.to_string()),
            "size" => size = Some(parse_size(v).ok_or_else(|| format!("bad size `{v}`"))?),
            "pos" => pos = Some(parse_position(v).ok_or_else(|| format!("bad position `{v}`"))?),
            "status" => status = Some(if v == "-" { None } else { Some(v.to_string()) }),
            "label" => label = Some(v.to_string()),
            other => return Err(format!("unknown key `{other}`")),
        }
    }
    let shape = shape.ok_or("missing shape")?;
    let size = size.ok_or("missing size")?;
    if shape != Shape::LabelOnly && (size.0 <= 0.0 || size.1 <= 0.0) {
        return Err(format!("object `{id}` needs a positive size"));
    }
    if size.0 < 0.0 || size.1 < 0.0 {
        return Err(format!("object `{id}` has a negative size"));
    }
    Ok(ObjectSpec {
        label: label.unwrap_or_else(|| id.clone()),
        id,
        shape,
        color: color.ok_or("missing color")?,
        size,
        position: pos.ok_or("missing pos")?,
        status: status.flatten(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_text_round_trip() {
        let text = "title \"three blocks\"\ncanvas 8x5\n\
            object b1 shape=square color=blue size=1x1 pos=at(0,0) status=- label=b1\n\
            object b2 shape=square color=blue size=1x1 pos=above(b1,0) status=\"held now\" label=\"block 2\"\n\
            object n shape=label-only color=black size=0x0 pos=inside(b1,0.5) status=- label=n\n";
        let s = DiagramSchema::parse(text).unwrap();
        assert_eq!(s.objects.len(), 3);
        assert_eq!(s.objects[1].status.as_deref(), Some("held now"));
        assert_eq!(s.to_text(), text);
        assert_eq!(DiagramSchema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_prose_and_bad_objects() {
        assert!(DiagramSchema::parse("Here is a nice diagram of the blocks.").is_err());
        assert!(DiagramSchema::parse("").is_err());
        let bad = "object a shape=square color=red size=0x1 pos=at(0,0) status=- label=a";
        assert!(DiagramSchema::parse(bad).is_err());
        let dup = "object a shape=circle color=red size=1x1 pos=at(0,0) status=- label=a\n\
                   object a shape=circle color=red size=1x1 pos=at(2,0) status=- label=a";
        assert!(DiagramSchema::parse(dup).is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333");
        assert_eq!(fmt_num(-1.5), "-1.5");
    }
}
