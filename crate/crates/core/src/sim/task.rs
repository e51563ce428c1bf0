//! Compiled form of a grounded problem: atoms are interned and states are
//! bitsets, which keeps BFS over tens of thousands of states cheap.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use crate::pddl::{ground_relevant, DomainDef, GroundAction, GroundAtom, ProblemDef, State};

pub type Bits = Box<[u64]>;

fn get(bits: &[u64], i: u32) -> bool {
    bits[(i / 64) as usize] >> (i % 64) & 1 == 1
}

fn set(bits: &mut [u64], i: u32, v: bool) {
    let w = &mut bits[(i / 64) as usize];
    if v {
        *w |= 1 << (i % 64);
    } else {
        *w &= !(1 << (i % 64));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BfsOutcome {
    /// Shortest plan as indices into [`Task::actions`].
    Found(Vec<u32>),
    /// Every state reachable within the depth cap was visited without
    /// reaching the goal; with no cap this proves unsolvability.
    Exhausted,
    /// The node limit was hit first.
    LimitHit,
}

pub struct Task {
    atoms: Vec<GroundAtom>,
    index: FxHashMap<GroundAtom, u32>,
    actions: Vec<GroundAction>,
    pre: Vec<Vec<u32>>,
    neg: Vec<Vec<u32>>,
    add: Vec<Vec<u32>>,
    del: Vec<Vec<u32>>,
    triggers: Vec<Vec<u32>>,
    untriggered: Vec<u32>,
    goal_pos: Vec<u32>,
    goal_neg: Vec<u32>,
    words: usize,
    init: Bits,
}

impl Task {
    pub fn new(domain: &DomainDef, problem: &ProblemDef) -> Task {
        let statics = domain.static_predicates();
        let grounded = ground_relevant(domain, problem);
        let mut atoms: Vec<GroundAtom> = Vec::new();
        let mut index: FxHashMap<GroundAtom, u32> = FxHashMap::default();
        let mut intern = |a: &GroundAtom, atoms: &mut Vec<GroundAtom>| -> u32 {
            if let Some(&i) = index.get(a) {
                return i;
            }
            let i = atoms.len() as u32;
            atoms.push(a.clone());
            index.insert(a.clone(), i);
            i
        };
        for a in &problem.init.atoms {
            intern(a, &mut atoms);
        }
        for g in &grounded {
            for a in &g.add {
                intern(a, &mut atoms);
            }
        }
        for a in problem.goal_pos.iter().chain(&problem.goal_neg) {
            intern(a, &mut atoms);
        }
        let lookup = |a: &GroundAtom| index.get(a).copied();
        let mut actions = Vec::new();
        let (mut pre, mut neg, mut add, mut del) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        'actions: for g in grounded {
            let mut p = Vec::new();
            for a in g.pre_pos.iter().filter(|a| !statics.contains(&a.predicate)) {
                match lookup(a) {
                    Some(i) => p.push(i),
                    // Never true: the atom is neither initial nor ever added.
                    None => continue 'actions,
                }
            }
            let n: Vec<u32> = g
                .pre_neg
                .iter()
                .filter(|a| !statics.contains(&a.predicate))
                .filter_map(lookup)
                .collect();
            let ad: Vec<u32> = g.add.iter().filter_map(lookup).collect();
            let de: Vec<u32> = g.del.iter().filter_map(lookup).collect();
            pre.push(p);
            neg.push(n);
            add.push(ad);
            del.push(de);
            actions.push(g);
        }
        let mut triggers = vec![Vec::new(); atoms.len()];
        let mut untriggered = Vec::new();
        for (i, p) in pre.iter().enumerate() {
            match p.first() {
                Some(&t) => triggers[t as usize].push(i as u32),
                None => untriggered.push(i as u32),
            }
        }
        let words = atoms.len().div_ceil(64).max(1);
        let mut init = vec![0u64; words].into_boxed_slice();
        for a in &problem.init.atoms {
            set(&mut init, index[a], true);
        }
        let goal_pos = problem.goal_pos.iter().map(|a| index[a]).collect();
        let goal_neg = problem.goal_neg.iter().map(|a| index[a]).collect();
        Task {
            atoms,
            index,
            actions,
            pre,
            neg,
            add,
            del,
            triggers,
            untriggered,
            goal_pos,
            goal_neg,
            words,
            init,
        }
    }

    pub fn init(&self) -> &Bits {
        &self.init
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, i: u32) -> &GroundAction {
        &self.actions[i as usize]
    }

    pub fn action_index(&self, action: &GroundAction) -> Option<u32> {
        self.actions
            .iter()
            .position(|a| a.name == action.name && a.args == action.args)
            .map(|i| i as u32)
    }

    /// `None` if the state mentions an atom this task never produces.
    pub fn encode(&self, state: &State) -> Option<Bits> {
        let mut b = vec![0u64; self.words].into_boxed_slice();
        for a in &state.atoms {
            set(&mut b, *self.index.get(a)?, true);
        }
        Some(b)
    }

    pub fn decode(&self, bits: &[u64]) -> State {
        State::new(
            (0..self.atoms.len() as u32)
                .filter(|&i| get(bits, i))
                .map(|i| self.atoms[i as usize].clone()),
        )
    }

    pub fn is_goal(&self, bits: &[u64]) -> bool {
        self.goal_pos.iter().all(|&i| get(bits, i))
            && !self.goal_neg.iter().any(|&i| get(bits, i))
    }

    /// Unmet goal literals; a cheap estimate when exact distances are
    /// unavailable.
    pub fn goal_count(&self, bits: &[u64]) -> u32 {
        (self.goal_pos.iter().filter(|&&i| !get(bits, i)).count()
            + self.goal_neg.iter().filter(|&&i| get(bits, i)).count()) as u32
    }

    pub fn applicable(&self, bits: &[u64], a: u32) -> bool {
        let a = a as usize;
        self.pre[a].iter().all(|&i| get(bits, i)) && !self.neg[a].iter().any(|&i| get(bits, i))
    }

    pub fn apply(&self, bits: &[u64], a: u32) -> Bits {
        let mut next: Bits = bits.into();
        for &i in &self.del[a as usize] {
            set(&mut next, i, false);
        }
        for &i in &self.add[a as usize] {
            set(&mut next, i, true);
        }
        next
    }

    /// Applicable actions in grounding order with their successor states.
    pub fn successors(&self, bits: &[u64]) -> Vec<(u32, Bits)> {
        let mut cands: Vec<u32> = self.untriggered.clone();
        for (w, &word) in bits.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let b = word.trailing_zeros();
                word &= word - 1;
                let atom = w * 64 + b as usize;
                if let Some(t) = self.triggers.get(atom) {
                    cands.extend_from_slice(t);
                }
            }
        }
        cands.sort_unstable();
        cands
            .into_iter()
            .filter(|&a| self.applicable(bits, a))
            .map(|a| (a, self.apply(bits, a)))
            .collect()
    }

    /// Breadth-first search from `start`. `cap` bounds plan length.
    pub fn bfs(&self, start: &[u64], cap: Option<usize>, node_limit: usize) -> BfsOutcome {
        if self.is_goal(start) {
            return BfsOutcome::Found(Vec::new());
        }
        let mut seen: FxHashMap<Bits, u32> = FxHashMap::default();
        // node -> (parent, action, depth)
        let mut nodes: Vec<(Bits, u32, u32, usize)> = Vec::new();
        seen.insert(start.into(), 0);
        nodes.push((start.into(), u32::MAX, u32::MAX, 0));
        let mut queue = VecDeque::from([0u32]);
        while let Some(n) = queue.pop_front() {
            let depth = nodes[n as usize].3;
            if cap.is_some_and(|c| depth >= c) {
                continue;
            }
            let succ = self.successors(&nodes[n as usize].0);
            for (a, next) in succ {
                if seen.contains_key(&next) {
                    continue;
                }
                let id = nodes.len() as u32;
                let goal = self.is_goal(&next);
                seen.insert(next.clone(), id);
                nodes.push((next, n, a, depth + 1));
                if goal {
                    let mut plan = Vec::new();
                    let mut cur = id;
                    while nodes[cur as usize].1 != u32::MAX {
                        plan.push(nodes[cur as usize].2);
                        cur = nodes[cur as usize].1;
                    }
                    plan.reverse();
                    return BfsOutcome::Found(plan);
                }
                if nodes.len() > node_limit {
                    return BfsOutcome::LimitHit;
                }
                queue.push_back(id);
            }
        }
        BfsOutcome::Exhausted
    }

    /// Enumerate every state reachable from `init`, up to `limit` states.
    /// Returns the states and the edges between them, or `None` when the
    /// limit is exceeded.
    pub fn reachable(&self, limit: usize) -> Option<(Vec<Bits>, Vec<(u32, u32)>)> {
        let mut seen: FxHashMap<Bits, u32> = FxHashMap::default();
        let mut states: Vec<Bits> = vec![self.init.clone()];
        seen.insert(self.init.clone(), 0);
        let mut edges = Vec::new();
        let mut i = 0;
        while i < states.len() {
            for (_, next) in self.successors(&states[i]) {
                let to = match seen.get(&next) {
                    Some(&t) => t,
                    None => {
                        if states.len() >= limit {
                            return None;
                        }
                        let t = states.len() as u32;
                        seen.insert(next.clone(), t);
                        states.push(next);
                        t
                    }
                };
                edges.push((i as u32, to));
            }
            i += 1;
        }
        Some((states, edges))
    }
}
