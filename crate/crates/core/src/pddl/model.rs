use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::PddlError;

/// Root of every type hierarchy.
pub const OBJECT: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedParam {
    /// Variable name without the leading `?`.
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// A parameterized atom inside an action schema. Arguments are indices into
/// the schema's parameter list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<usize>,
}

impl AtomTemplate {
    pub fn bind(&self, binding: &[String]) -> GroundAtom {
        GroundAtom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|&i| binding[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub pre_pos: Vec<AtomTemplate>,
    pub pre_neg: Vec<AtomTemplate>,
    pub add: Vec<AtomTemplate>,
    pub del: Vec<AtomTemplate>,
}

impl ActionSchema {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Instantiate the schema with `binding` (one object per parameter).
    /// Types are not checked here; see [`crate::pddl::ground`].
    pub fn instantiate(&self, binding: &[String]) -> GroundAction {
        let set = |ts: &[AtomTemplate]| -> Vec<GroundAtom> {
            let set: BTreeSet<GroundAtom> = ts.iter().map(|t| t.bind(binding)).collect();
            set.into_iter().collect()
        };
        GroundAction {
            name: self.name.clone(),
            args: binding.to_vec(),
            pre_pos: set(&self.pre_pos),
            pre_neg: set(&self.pre_neg),
            add: set(&self.add),
            del: set(&self.del),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    /// child type -> parent type; `object` is implicit and never a key.
    pub types: BTreeMap<String, String>,
    /// Declared types in source order, used when printing.
    pub type_order: Vec<String>,
    pub predicates: Vec<PredicateDef>,
    pub actions: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDef> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == OBJECT || self.types.contains_key(ty)
    }

    /// True if `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        if ancestor == OBJECT {
            return self.has_type(ty);
        }
        let mut cur = ty;
        // The hierarchy is acyclic after parsing; the bound guards malformed
        // hand-built definitions.
        for _ in 0..=self.types.len() {
            if cur == ancestor {
                return true;
            }
            match self.types.get(cur) {
                Some(parent) => cur = parent,
                None => return false,
            }
        }
        false
    }

    /// Predicates that no action adds or deletes.
    pub fn static_predicates(&self) -> BTreeSet<String> {
        let mut fluent = BTreeSet::new();
        for a in &self.actions {
            for t in a.add.iter().chain(&a.del) {
                fluent.insert(t.predicate.clone());
            }
        }
        self.predicates
            .iter()
            .map(|p| p.name.clone())
            .filter(|n| !fluent.contains(n))
            .collect()
    }
}

/// A fully instantiated atom, e.g. `(on a b)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Closed-world planning state: an atom is true iff it is in the set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub atoms: BTreeSet<GroundAtom>,
}

impl State {
    pub fn new(atoms: impl IntoIterator<Item = GroundAtom>) -> Self {
        State {
            atoms: atoms.into_iter().collect(),
        }
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `goal_pos ⊆ state` and `goal_neg ∩ state = ∅`.
    pub fn satisfies<'a>(
        &self,
        pos: impl IntoIterator<Item = &'a GroundAtom>,
        neg: impl IntoIterator<Item = &'a GroundAtom>,
    ) -> bool {
        pos.into_iter().all(|a| self.contains(a)) && !neg.into_iter().any(|a| self.contains(a))
    }

    /// Canonical text: one atom per line in sorted order.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for a in &self.atoms {
            out.push_str(&a.to_string());
            out.push('\n');
        }
        out
    }
}

/// A grounded STRIPS action. The atom vectors are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<GroundAtom>,
    pub pre_neg: Vec<GroundAtom>,
    pub add: Vec<GroundAtom>,
    pub del: Vec<GroundAtom>,
}

impl GroundAction {
    /// The VAL-style plan line, e.g. `(stack a b)`.
    pub fn signature(&self) -> String {
        let mut s = format!("({}", self.name);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemDef {
    pub name: String,
    pub domain_name: String,
    /// object identifier -> declared type
    pub objects: BTreeMap<String, String>,
    pub init: State,
    pub goal_pos: BTreeSet<GroundAtom>,
    pub goal_neg: BTreeSet<GroundAtom>,
}

impl ProblemDef {
    pub fn goal_satisfied(&self, state: &State) -> bool {
        state.satisfies(&self.goal_pos, &self.goal_neg)
    }

    /// Objects whose type is `ty` or a subtype of it, sorted by name.
    pub fn objects_of<'a>(&'a self, domain: &'a DomainDef, ty: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |(_, t)| domain.is_subtype(t, ty))
            .map(|(o, _)| o.as_str())
    }

    /// Check one atom against predicate signatures and object declarations.
    pub fn check_atom(&self, domain: &DomainDef, atom: &GroundAtom) -> Result<(), PddlError> {
        let pred = domain
            .predicate(&atom.predicate)
            .ok_or_else(|| PddlError::UndeclaredPredicate(atom.predicate.clone()))?;
        if pred.arity() != atom.args.len() {
            return Err(PddlError::Arity(format!(
                "{atom} has {} arguments, `{}` expects {}",
                atom.args.len(),
                pred.name,
                pred.arity()
            )));
        }
        for (arg, param) in atom.args.iter().zip(&pred.params) {
            let ty = self
                .objects
                .get(arg)
                .ok_or_else(|| PddlError::UnknownObject(arg.clone()))?;
            if !domain.is_subtype(ty, &param.ty) {
                return Err(PddlError::TypeMismatch(format!(
                    "object `{arg}` of type `{ty}` used as `{}` in {atom}",
                    param.ty
                )));
            }
        }
        Ok(())
    }
}

/// One step of a plan as written in a plan file, before resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanStep {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn from_actions<'a>(actions: impl IntoIterator<Item = &'a GroundAction>) -> Self {
        Plan {
            steps: actions
                .into_iter()
                .map(|a| PlanStep {
                    name: a.name.clone(),
                    args: a.args.clone(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// VAL-compatible plan text, one action per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for st in &self.steps {
            s.push_str(&st.to_string());
            s.push('\n');
        }
        s
    }
}
