use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{palette_rgb, DiagramError, DiagramSchema, Position, Relation, Shape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Positive-area intersection; shared edges do not count.
    pub fn overlaps(&self, o: &BBox) -> bool {
        const EPS: f64 = 1e-9;
        let ix = (self.x + self.w).min(o.x + o.w) - self.x.max(o.x);
        let iy = (self.y + self.h).min(o.y + o.h) - self.y.max(o.y);
        ix > EPS && iy > EPS
    }
}

/// Resolved boxes in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub boxes: Vec<(String, BBox)>,
}

impl Layout {
    pub fn get(&self, id: &str) -> Option<&BBox> {
        self.boxes.iter().find(|(i, _)| i == id).map(|(_, b)| b)
    }

    /// Structured text: `<id> <x> <y> <w> <h>` per line, three decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, b) in &self.boxes {
            s.push_str(&format!("{id} {:.3} {:.3} {:.3} {:.3}\n", b.x, b.y, b.w, b.h));
        }
        s
    }
}

/// Resolve every relation to an absolute box.
///
/// above/below stack along y with the gap and center on x; left-of/right-of
/// place along x and center on y; inside centers within the target.
pub fn layout(schema: &DiagramSchema) -> Result<Layout, DiagramError> {
    let index: BTreeMap<&str, usize> = schema
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| (o.id.as_str(), i))
        .collect();
    let mut resolved: Vec<Option<BBox>> = vec![None; schema.objects.len()];
    for start in 0..schema.objects.len() {
        if resolved[start].is_some() {
            continue;
        }
        // Walk the relation chain to an anchored object, then resolve back.
        let mut chain = vec![start];
        let mut on_chain = BTreeSet::from([start]);
        loop {
            let cur = *chain.last().unwrap();
            let o = &schema.objects[cur];
            let Position::Relative { target, .. } = &o.position else {
                break;
            };
            let &t = index.get(target.as_str()).ok_or_else(|| DiagramError::DanglingRelation {
                id: o.id.clone(),
                target: target.clone(),
            })?;
            if resolved[t].is_some() {
                break;
            }
            if !on_chain.insert(t) {
                let from = chain.iter().position(|&c| c == t).unwrap();
                let mut path: Vec<String> = chain[from..]
                    .iter()
                    .map(|&c| schema.objects[c].id.clone())
                    .collect();
                path.push(schema.objects[t].id.clone());
                return Err(DiagramError::CyclicRelation(path));
            }
            chain.push(t);
        }
        for &i in chain.iter().rev() {
            let o = &schema.objects[i];
            let (w, h) = o.size;
            let b = match &o.position {
                Position::Absolute { x, y } => BBox { x: *x, y: *y, w, h },
                Position::Relative { relation, target, gap } => {
                    let t = resolved[index[target.as_str()]].expect("resolved before dependents");
                    let cx = t.x + (t.w - w) / 2.0;
                    let cy = t.y + (t.h - h) / 2.0;
                    match relation {
                        Relation::Above => BBox { x: cx, y: t.y + t.h + gap, w, h },
                        Relation::Below => BBox { x: cx, y: t.y - h - gap, w, h },
                        Relation::RightOf => BBox { x: t.x + t.w + gap, y: cy, w, h },
                        Relation::LeftOf => BBox { x: t.x - w - gap, y: cy, w, h },
                        Relation::Inside => BBox { x: cx, y: cy, w, h },
                    }
                }
            };
            resolved[i] = Some(b);
        }
    }
    Ok(Layout {
        boxes: schema
            .objects
            .iter()
            .zip(resolved)
            .map(|(o, b)| (o.id.clone(), b.expect("all resolved")))
            .collect(),
    })
}

/// Number of relation links followed to anchor every object, summed.
pub fn relation_hops(schema: &DiagramSchema) -> usize {
    let index: BTreeMap<&str, &Position> = schema
        .objects
        .iter()
        .map(|o| (o.id.as_str(), &o.position))
        .collect();
    schema
        .objects
        .iter()
        .map(|o| {
            let mut hops = 0;
            let mut cur = &o.position;
            while let Position::Relative { target, .. } = cur {
                hops += 1;
                match index.get(target.as_str()) {
                    Some(p) if hops <= schema.objects.len() => cur = p,
                    _ => break,
                }
            }
            hops
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    MissingObject(String),
    UnknownObject(String),
    Overlap(String, String),
    DanglingRelation { id: String, target: String },
    PaletteViolation { id: String, color: String },
    CyclicRelation(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingObject(id) => write!(f, "missing-object {id}"),
            Violation::UnknownObject(id) => write!(f, "unknown-object {id}"),
            Violation::Overlap(a, b) => write!(f, "overlap {a} {b}"),
            Violation::DanglingRelation { id, target } => write!(f, "dangling-relation {id} -> {target}"),
            Violation::PaletteViolation { id, color } => write!(f, "palette-violation {id} {color}"),
            Violation::CyclicRelation(path) => write!(f, "cyclic-relation {}", path.join(" -> ")),
        }
    }
}

/// All problems with a schema, in a deterministic order. An empty result
/// means the schema passes.
pub fn check_schema<S: AsRef<str>>(schema: &DiagramSchema, expected_objects: &[S]) -> Vec<Violation> {
    let mut out = Vec::new();
    let expected: BTreeSet<&str> = expected_objects.iter().map(|s| s.as_ref()).collect();
    let present: BTreeSet<&str> = schema.objects.iter().map(|o| o.id.as_str()).collect();
    for e in &expected {
        if !present.contains(e) {
            out.push(Violation::MissingObject(e.to_string()));
        }
    }
    for o in &schema.objects {
        if !expected.contains(o.id.as_str()) {
            out.push(Violation::UnknownObject(o.id.clone()));
        }
        if palette_rgb(&o.color).is_none() {
            out.push(Violation::PaletteViolation {
                id: o.id.clone(),
                color: o.color.clone(),
            });
        }
        if let Position::Relative { target, .. } = &o.position {
            if !present.contains(target.as_str()) {
                out.push(Violation::DanglingRelation {
                    id: o.id.clone(),
                    target: target.clone(),
                });
            }
        }
    }
    let dangling = out.iter().any(|v| matches!(v, Violation::DanglingRelation { .. }));
    if !dangling {
        match layout(schema) {
            Ok(l) => {
                let solid: Vec<(&str, &BBox)> = schema
                    .objects
                    .iter()
                    .zip(&l.boxes)
                    .filter(|(o, (_, b))| o.shape != Shape::LabelOnly && b.area() > 0.0)
                    .map(|(o, (_, b))| (o.id.as_str(), b))
                    .collect();
                for i in 0..solid.len() {
                    for j in i + 1..solid.len() {
                        if solid[i].1.overlaps(solid[j].1) {
                            out.push(Violation::Overlap(solid[i].0.to_string(), solid[j].0.to_string()));
                        }
                    }
                }
            }
            Err(DiagramError::CyclicRelation(path)) => out.push(Violation::CyclicRelation(path)),
            Err(_) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::ObjectSpec;

    fn sq(id: &str, pos: Position) -> ObjectSpec {
        ObjectSpec {
            id: id.into(),
            shape: Shape::Square,
            color: "blue".into(),
            size: (1.0, 1.0),
            position: pos,
            status: None,
            label: id.into(),
        }
    }

    fn rel(relation: Relation, target: &str) -> Position {
        Position::Relative {
            relation,
            target: target.into(),
            gap: 0.0,
        }
    }

    fn schema(objects: Vec<ObjectSpec>) -> DiagramSchema {
        DiagramSchema {
            title: "t".into(),
            canvas: (10.0, 10.0),
            objects,
        }
    }

    #[test]
    fn above_stacks_and_centers() {
        let s = schema(vec![
            sq("a", rel(Relation::Above, "b")),
            sq("b", Position::Absolute { x: 2.0, y: 0.0 }),
        ]);
        let l = layout(&s).unwrap();
        assert_eq!(*l.get("a").unwrap(), BBox { x: 2.0, y: 1.0, w: 1.0, h: 1.0 });

        let chain = schema(vec![
            sq("c", rel(Relation::Above, "b")),
            sq("b", rel(Relation::Above, "a")),
            sq("a", Position::Absolute { x: 0.0, y: 0.0 }),
        ]);
        let l = layout(&chain).unwrap();
        assert_eq!((l.get("c").unwrap().x, l.get("c").unwrap().y), (0.0, 2.0));
        assert_eq!(relation_hops(&chain), 3);
    }

    #[test]
    fn cycles_are_reported_with_their_path() {
        let s = schema(vec![sq("a", rel(Relation::Above, "b")), sq("b", rel(Relation::Above, "a"))]);
        assert_eq!(
            layout(&s),
            Err(DiagramError::CyclicRelation(vec!["a".into(), "b".into(), "a".into()]))
        );
    }

    #[test]
    fn violations() {
        let s = schema(vec![
            sq("a", Position::Absolute { x: 0.0, y: 0.0 }),
            sq("b", Position::Absolute { x: 0.0, y: 0.0 }),
        ]);
        assert_eq!(check_schema(&s, &["a", "b"]), vec![Violation::Overlap("a".into(), "b".into())]);
        assert_eq!(
            check_schema(&s, &["a", "b", "c"]),
            vec![Violation::MissingObject("c".into()), Violation::Overlap("a".into(), "b".into())]
        );
        let touching = schema(vec![
            sq("a", Position::Absolute { x: 0.0, y: 0.0 }),
            sq("b", rel(Relation::RightOf, "a")),
        ]);
        assert!(check_schema(&touching, &["a", "b"]).is_empty());
        let mut bad = touching.clone();
        bad.objects[1].color = "chartreuse".into();
        bad.objects[0].position = rel(Relation::Above, "zz");
        let v = check_schema(&bad, &["a", "b"]);
        assert!(v.contains(&Violation::DanglingRelation { id: "a".into(), target: "zz".into() }));
        assert!(v.contains(&Violation::PaletteViolation { id: "b".into(), color: "chartreuse".into() }));
        assert!(check_schema(&schema(vec![]), &[] as &[&str]).is_empty());
    }
}
