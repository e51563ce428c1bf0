use super::model::*;

/// All type-correct bindings of every schema, enumerated lazily.
///
/// Order: schemas by name, then argument tuples lexicographically. Bindings
/// that repeat an object are included; domain preconditions rule them out
/// where they are impossible.
pub struct Grounding<'a> {
    schemas: Vec<&'a ActionSchema>,
    /// Per schema, per parameter: candidate objects in sorted order.
    candidates: Vec<Vec<Vec<String>>>,
}

pub fn ground<'a>(domain: &'a DomainDef, problem: &ProblemDef) -> Grounding<'a> {
    let mut schemas: Vec<&ActionSchema> = domain.actions.iter().collect();
    schemas.sort_by(|a, b| a.name.cmp(&b.name));
    let candidates = schemas
        .iter()
        .map(|s| {
            s.params
                .iter()
                .map(|p| problem.objects_of(domain, &p.ty).map(str::to_string).collect())
                .collect()
        })
        .collect();
    Grounding { schemas, candidates }
}

impl<'a> Grounding<'a> {
    /// Number of ground actions, computed without enumerating them.
    pub fn len(&self) -> usize {
        self.candidates
            .iter()
            .map(|c| c.iter().map(Vec::len).product::<usize>())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of ground actions of one schema.
    pub fn count_for(&self, schema: &str) -> usize {
        self.schemas
            .iter()
            .zip(&self.candidates)
            .filter(|(s, _)| s.name == schema)
            .map(|(_, c)| c.iter().map(Vec::len).product::<usize>())
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = GroundAction> + '_ {
        self.schemas
            .iter()
            .zip(&self.candidates)
            .flat_map(|(schema, cands)| Bindings::new(cands).map(move |b| schema.instantiate(&b)))
    }
}

/// Odometer over the cartesian product of candidate lists, last position
/// varying fastest.
struct Bindings<'c> {
    cands: &'c [Vec<String>],
    idx: Vec<usize>,
    done: bool,
}

impl<'c> Bindings<'c> {
    fn new(cands: &'c [Vec<String>]) -> Self {
        Bindings {
            cands,
            idx: vec![0; cands.len()],
            done: cands.iter().any(Vec::is_empty),
        }
    }
}

impl Iterator for Bindings<'_> {
    type Item = Vec<String>;

    fn next(&mut self) -> Option<Vec<String>> {
        if self.done {
            return None;
        }
        let out = self
            .idx
            .iter()
            .zip(self.cands)
            .map(|(&i, c)| c[i].clone())
            .collect();
        let mut pos = self.idx.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.idx[pos] += 1;
            if self.idx[pos] < self.cands[pos].len() {
                break;
            }
            self.idx[pos] = 0;
        }
        Some(out)
    }
}

/// The subsequence of [`ground`] whose static preconditions hold in the
/// initial state. Static atoms never change, so the dropped actions can never
/// become applicable. Enumerated by backtracking so large schemas (seven
/// position parameters in tetris) stay cheap.
pub fn ground_relevant(domain: &DomainDef, problem: &ProblemDef) -> Vec<GroundAction> {
    let statics = domain.static_predicates();
    let g = ground(domain, problem);
    let mut out = Vec::new();
    for (schema, cands) in g.schemas.iter().zip(&g.candidates) {
        // Static literals, each checked as soon as its last argument is bound.
        let mut checks: Vec<Vec<(bool, &AtomTemplate)>> = vec![Vec::new(); schema.params.len().max(1)];
        let mut fail_always = false;
        for (positive, list) in [(true, &schema.pre_pos), (false, &schema.pre_neg)] {
            for t in list.iter().filter(|t| statics.contains(&t.predicate)) {
                match t.args.iter().max() {
                    Some(&last) => checks[last].push((positive, t)),
                    None => {
                        let atom = t.bind(&[]);
                        if problem.init.contains(&atom) != positive {
                            fail_always = true;
                        }
                    }
                }
            }
        }
        if fail_always || cands.iter().any(Vec::is_empty) {
            continue;
        }
        let mut binding: Vec<String> = Vec::with_capacity(cands.len());
        search(schema, cands, &checks, &problem.init, &mut binding, &mut out);
    }
    out
}

fn search(
    schema: &ActionSchema,
    cands: &[Vec<String>],
    checks: &[Vec<(bool, &AtomTemplate)>],
    init: &State,
    binding: &mut Vec<String>,
    out: &mut Vec<GroundAction>,
) {
    let depth = binding.len();
    if depth == cands.len() {
        out.push(schema.instantiate(binding));
        return;
    }
    for obj in &cands[depth] {
        binding.push(obj.clone());
        let ok = checks[depth]
            .iter()
            .all(|(positive, t)| init.contains(&t.bind(binding)) == *positive);
        if ok {
            search(schema, cands, checks, init, binding, out);
        }
        binding.pop();
    }
}
