use std::collections::{BTreeMap, BTreeSet};

/// Bookkeeping for one depth.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepthEntry {
    /// Backtrack attempts used at this depth.
    pub attempts: usize,
    /// Validated nodes in ranking order.
    pub validated: Vec<u64>,
    /// Nodes that were expanded (or chosen for expansion).
    pub expanded: BTreeSet<u64>,
    pub invalidated: BTreeSet<u64>,
    /// Most recent frontier drawn from this depth.
    pub frontier: Vec<u64>,
    pub dead: bool,
}

impl DepthEntry {
    pub fn spare(&self) -> Vec<u64> {
        self.validated
            .iter()
            .copied()
            .filter(|id| !self.expanded.contains(id) && !self.invalidated.contains(id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BacktrackStep {
    pub depth: usize,
    pub frontier: Vec<u64>,
    /// Depths given up on the way, with the nodes invalidated there.
    pub abandoned: Vec<(usize, Vec<u64>)>,
}

/// Per-depth state for backtracking: which validated nodes are still
/// unexpanded and how many attempts each depth has used.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepthLedger {
    pub depths: BTreeMap<usize, DepthEntry>,
}

impl DepthLedger {
    pub fn entry(&mut self, depth: usize) -> &mut DepthEntry {
        self.depths.entry(depth).or_default()
    }

    /// Record validated nodes (in ranking order) and the frontier chosen
    /// among them.
    pub fn record(&mut self, depth: usize, ranked: &[u64], frontier: &[u64]) {
        let e = self.entry(depth);
        e.validated.extend_from_slice(ranked);
        e.expanded.extend(frontier.iter().copied());
        e.frontier = frontier.to_vec();
    }

    /// Validated nodes not invalidated, in ranking order.
    fn live(e: &DepthEntry) -> Vec<u64> {
        e.validated.iter().copied().filter(|id| !e.invalidated.contains(id)).collect()
    }

    /// Pick the next frontier after a dead end: the deepest live depth with
    /// validated nodes. Unexpanded nodes are preferred; when none are left
    /// the already expanded ones are expanded again. A depth that already
    /// used all `max_attempts` is invalidated and the search moves
    /// shallower. `None` means no ancestor is left.
    pub fn backtrack(&mut self, k: usize, max_attempts: usize) -> Option<BacktrackStep> {
        let mut abandoned = Vec::new();
        let depths: Vec<usize> = self.depths.keys().rev().copied().collect();
        for d in depths {
            let e = self.depths.get_mut(&d).unwrap();
            if e.dead {
                continue;
            }
            let live = Self::live(e);
            if live.is_empty() {
                continue;
            }
            if e.attempts >= max_attempts {
                e.dead = true;
                e.invalidated.extend(live.iter().copied());
                abandoned.push((d, live));
                continue;
            }
            let spare = e.spare();
            let pool = if spare.is_empty() { live } else { spare };
            e.attempts += 1;
            let frontier: Vec<u64> = pool.into_iter().take(k.max(1)).collect();
            e.expanded.extend(frontier.iter().copied());
            e.frontier = frontier.clone();
            return Some(BacktrackStep {
                depth: d,
                frontier,
                abandoned,
            });
        }
        None
    }
}
