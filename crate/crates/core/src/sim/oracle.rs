use std::collections::VecDeque;
use std::sync::Mutex;

use rustc_hash::FxHashMap;

use super::task::{BfsOutcome, Bits, Task};
use crate::pddl::{DomainDef, ProblemDef, State};

/// States enumerated up front before falling back to per-query search.
pub const EXHAUSTIVE_LIMIT: usize = 400_000;
/// Node limit for a single fallback forward search.
pub const QUERY_LIMIT: usize = 150_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GoalDistance {
    Exact(u32),
    /// The goal is unreachable from this state.
    DeadEnd,
    /// Search limits were hit; number of unmet goal literals.
    Estimate(u32),
}

impl GoalDistance {
    /// Smaller is closer to the goal; dead ends sort last.
    pub fn sort_key(self) -> u32 {
        match self {
            GoalDistance::Exact(d) | GoalDistance::Estimate(d) => d,
            GoalDistance::DeadEnd => u32::MAX,
        }
    }

    pub fn exact(self) -> Option<u32> {
        match self {
            GoalDistance::Exact(d) => Some(d),
            _ => None,
        }
    }
}

/// Goal distances for arbitrary states of one problem.
///
/// When the reachable space is small enough it is enumerated once and a
/// backward BFS from the goal states gives exact distances for all of it.
/// Other states are answered by a bounded forward BFS, cached per state.
pub struct DistanceOracle {
    task: Task,
    table: Option<FxHashMap<Bits, u32>>,
    cache: Mutex<FxHashMap<Bits, GoalDistance>>,
}

impl DistanceOracle {
    pub fn new(domain: &DomainDef, problem: &ProblemDef) -> Self {
        Self::with_limit(domain, problem, EXHAUSTIVE_LIMIT)
    }

    pub fn with_limit(domain: &DomainDef, problem: &ProblemDef, limit: usize) -> Self {
        let task = Task::new(domain, problem);
        let table = task.reachable(limit).map(|(states, edges)| {
            let n = states.len();
            let mut rev_start = vec![0usize; n + 1];
            for &(_, to) in &edges {
                rev_start[to as usize + 1] += 1;
            }
            for i in 0..n {
                rev_start[i + 1] += rev_start[i];
            }
            let mut fill = rev_start.clone();
            let mut rev = vec![0u32; edges.len()];
            for &(from, to) in &edges {
                rev[fill[to as usize]] = from;
                fill[to as usize] += 1;
            }
            let mut dist = vec![u32::MAX; n];
            let mut queue = VecDeque::new();
            for (i, s) in states.iter().enumerate() {
                if task.is_goal(s) {
                    dist[i] = 0;
                    queue.push_back(i);
                }
            }
            while let Some(i) = queue.pop_front() {
                for &p in &rev[rev_start[i]..rev_start[i + 1]] {
                    if dist[p as usize] == u32::MAX {
                        dist[p as usize] = dist[i] + 1;
                        queue.push_back(p as usize);
                    }
                }
            }
            states.into_iter().zip(dist).collect()
        });
        DistanceOracle {
            task,
            table,
            cache: Mutex::new(FxHashMap::default()),
        }
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    /// True when every reachable state was enumerated, so distances of
    /// reachable states (and dead ends) are exact.
    pub fn is_exhaustive(&self) -> bool {
        self.table.is_some()
    }

    pub fn distance(&self, state: &State) -> GoalDistance {
        match self.task.encode(state) {
            Some(b) => self.distance_bits(&b),
            None => GoalDistance::DeadEnd,
        }
    }

    pub fn distance_bits(&self, bits: &Bits) -> GoalDistance {
        if let Some(table) = &self.table {
            if let Some(&d) = table.get(bits) {
                return if d == u32::MAX {
                    GoalDistance::DeadEnd
                } else {
                    GoalDistance::Exact(d)
                };
            }
        }
        if let Some(&d) = self.cache.lock().unwrap().get(bits) {
            return d;
        }
        let d = match self.task.bfs(bits, None, QUERY_LIMIT) {
            BfsOutcome::Found(p) => GoalDistance::Exact(p.len() as u32),
            BfsOutcome::Exhausted => GoalDistance::DeadEnd,
            BfsOutcome::LimitHit => GoalDistance::Estimate(self.task.goal_count(bits)),
        };
        self.cache.lock().unwrap().insert(bits.clone(), d);
        d
    }
}
