use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use super::{ActionProposal, Bundle, CallCounters, CallKind, Proposer, ProposerError, Verdict};
use crate::diagram::{
    oracle_schema_order, schema_from_state, DiagramSchema, ObjectSpec, StyleMap, PALETTE,
};
use crate::nl::{resolve_action_text, state_from_nl, state_to_nl, NlError, PhraseTable};
use crate::pddl::{applicable, apply, DomainDef, GroundAction, ProblemDef, State};
use crate::sim::{splitmix, DistanceOracle, DomainId, FaultModel, GoalDistance};

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Randomness for one proposer call. Derived only from the inputs, so the
/// fault stream does not depend on thread scheduling.
pub fn call_rng(seed: u64, kind: &str, key: u64, sample: u64, attempt: u64) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for v in [fnv(kind), key, sample, attempt] {
        h = splitmix(h ^ v);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Simulator-backed proposer for one problem instance.
pub struct OracleProposer {
    domain: DomainDef,
    problem: ProblemDef,
    table: PhraseTable,
    oracle: DistanceOracle,
    faults: FaultModel,
    style: StyleMap,
    counters: CallCounters,
}

impl OracleProposer {
    pub fn new(id: DomainId, problem: ProblemDef, faults: FaultModel) -> Self {
        let domain = id.domain();
        let oracle = DistanceOracle::new(&domain, &problem);
        OracleProposer {
            table: PhraseTable::for_domain(id),
            style: StyleMap::default_for(id),
            oracle,
            domain,
            problem,
            faults,
            counters: CallCounters::default(),
        }
    }

    pub fn domain(&self) -> &DomainDef {
        &self.domain
    }

    pub fn problem(&self) -> &ProblemDef {
        &self.problem
    }

    pub fn table(&self) -> &PhraseTable {
        &self.table
    }

    pub fn faults(&self) -> &FaultModel {
        &self.faults
    }

    pub fn distance(&self, state: &State) -> GoalDistance {
        self.oracle.distance(state)
    }

    pub fn state_text(&self, state: &State) -> String {
        state_to_nl(state, &self.domain, &self.table).expect("corpus phrase tables cover their domains")
    }

    pub fn action_text(&self, action: &GroundAction) -> String {
        self.table
            .ground_action_text(action)
            .expect("corpus phrase tables cover their domains")
    }

    fn parse_state(&self, text: &str) -> Result<State, NlError> {
        state_from_nl(text, &self.domain, &self.problem, &self.table)
    }

    fn resolve(&self, text: &str) -> Result<GroundAction, NlError> {
        resolve_action_text(text, &self.domain, &self.problem, &self.table)
    }

    /// States along an action path from the initial state, or the index of
    /// the first step that cannot be resolved or applied.
    fn replay(&self, path: &[String]) -> Result<Vec<State>, usize> {
        let mut states = vec![self.problem.init.clone()];
        for (i, t) in path.iter().enumerate() {
            let a = self.resolve(t).map_err(|_| i)?;
            let next = apply(states.last().unwrap(), &a).map_err(|_| i)?;
            states.push(next);
        }
        Ok(states)
    }

    fn flip(&self, rate: f64, kind: &str, key: u64, attempt: u64) -> bool {
        rate > 0.0 && call_rng(self.faults.seed, kind, key, 0, attempt).random::<f64>() < rate
    }

    /// An action that is not applicable in `state`, with the state it would
    /// claim to reach.
    fn corrupt(&self, state: &State, rng: &mut ChaCha8Rng) -> Option<(GroundAction, State)> {
        let bad: Vec<&GroundAction> = self
            .oracle
            .task()
            .actions()
            .iter()
            .filter(|a| !applicable(state, a))
            .collect();
        if bad.is_empty() {
            return None;
        }
        let a = bad[rng.random_range(0..bad.len())].clone();
        let mut claimed = state.clone();
        for d in &a.del {
            claimed.atoms.remove(d);
        }
        claimed.atoms.extend(a.add.iter().cloned());
        Some((a, claimed))
    }

    fn variant(&self, index: usize) -> Result<String, ProposerError> {
        let mut style = self.style.clone();
        match index % 3 {
            0 => {}
            1 => {
                // Same layout with a shifted palette.
                for ts in style.types.values_mut() {
                    if let Some(i) = PALETTE.iter().position(|(n, _)| *n == ts.color) {
                        ts.color = PALETTE[(i + 3) % PALETTE.len()].0.to_string();
                    }
                }
            }
            _ => {
                // Oversized shapes; solid neighbours end up overlapping.
                for ts in style.types.values_mut() {
                    if ts.size.0 > 0.0 {
                        ts.size = (ts.size.0 * 2.5, ts.size.1 * 2.5);
                    }
                }
            }
        }
        let schema = schema_from_state(&self.problem.init, &self.problem, &self.domain, &style)?;
        Ok(schema.to_text())
    }
}

fn describe(o: &ObjectSpec) -> String {
    format!("{} {} {} {}", o.shape.as_str(), o.color, o.position, o.status.as_deref().unwrap_or("-"))
}

impl Proposer for OracleProposer {
    fn propose_domain_schemas(&self, _domain_text: &str, count: usize) -> Result<Vec<String>, ProposerError> {
        self.counters.bump(CallKind::DomainSchemas);
        (0..count).map(|i| self.variant(i)).collect()
    }

    fn rank_schemas(&self, candidates: &[DiagramSchema], expected: &[String]) -> Result<Vec<usize>, ProposerError> {
        self.counters.bump(CallKind::RankSchemas);
        if candidates.is_empty() {
            return Err(ProposerError::EmptyCandidates);
        }
        Ok(oracle_schema_order(candidates, expected))
    }

    fn propose_action(&self, ctx: &Bundle, _goal: &Bundle, sample_index: usize) -> Result<ActionProposal, ProposerError> {
        self.counters.bump(CallKind::ProposeAction);
        let state = self.parse_state(&ctx.state_text)?;
        let task = self.oracle.task();
        let mut rng = call_rng(self.faults.seed, "propose", ctx.key, sample_index as u64, 0);
        let corrupt = self.faults.invalid_action_rate > 0.0 && rng.random::<f64>() < self.faults.invalid_action_rate;

        let mut ranked: Vec<(u32, u32, State)> = Vec::new();
        if let Some(bits) = task.encode(&state) {
            let visited: FxHashSet<_> = match self.replay(&ctx.path) {
                Ok(states) => states.iter().filter_map(|s| task.encode(s)).collect(),
                Err(_) => [bits.clone()].into_iter().collect(),
            };
            let succ = task.successors(&bits);
            let fresh: Vec<_> = succ.iter().filter(|(_, b)| !visited.contains(b)).collect();
            let pool = if fresh.is_empty() { succ.iter().collect() } else { fresh };
            ranked = pool
                .into_iter()
                .map(|(a, b)| (self.oracle.distance_bits(b).sort_key(), *a, task.decode(b)))
                .collect();
            ranked.sort_by_key(|(d, a, _)| (*d, *a));
        }

        if corrupt || ranked.is_empty() {
            if let Some((a, claimed)) = self.corrupt(&state, &mut rng) {
                return Ok(ActionProposal {
                    action_text: self.action_text(&a),
                    next_state_text: self.state_text(&claimed),
                    rationale: "this looks like progress".into(),
                });
            }
        }
        let Some((dist, a, next)) = ranked.get(sample_index % ranked.len().max(1)) else {
            return Ok(ActionProposal {
                action_text: "wait".into(),
                next_state_text: ctx.state_text.clone(),
                rationale: "no action applies".into(),
            });
        };
        Ok(ActionProposal {
            action_text: self.action_text(task.action(*a)),
            next_state_text: self.state_text(next),
            rationale: if *dist == u32::MAX {
                "no successor can still reach the goal".into()
            } else {
                format!("leaves {dist} steps to the goal")
            },
        })
    }

    fn make_schema(&self, _key: u64, state_text: &str, _action: Option<&str>, style: &StyleMap) -> Result<String, ProposerError> {
        self.counters.bump(CallKind::MakeSchema);
        let state = self.parse_state(state_text)?;
        Ok(schema_from_state(&state, &self.problem, &self.domain, style)?.to_text())
    }

    fn reflect_schema(
        &self,
        key: u64,
        attempt: usize,
        schema: &DiagramSchema,
        state_text: &str,
        _action: Option<&str>,
        style: &StyleMap,
    ) -> Result<Verdict, ProposerError> {
        self.counters.bump(CallKind::ReflectSchema);
        let state = match self.parse_state(state_text) {
            Ok(s) => s,
            Err(e) => return Ok(Verdict::fail(format!("state description unreadable: {e}"))),
        };
        let truth = schema_from_state(&state, &self.problem, &self.domain, style)?;
        let mut wrong = Vec::new();
        for t in &truth.objects {
            match schema.get(&t.id) {
                None => wrong.push(format!("{} missing", t.id)),
                Some(o) if describe(o) != describe(t) => wrong.push(format!("{} misplaced", t.id)),
                Some(_) => {}
            }
        }
        for o in &schema.objects {
            if truth.get(&o.id).is_none() {
                wrong.push(format!("{} not in the state", o.id));
            }
        }
        if !wrong.is_empty() {
            return Ok(Verdict::fail(wrong.join("; ")));
        }
        if self.flip(self.faults.local_false_negative_rate, "reflect", key, attempt as u64) {
            return Ok(Verdict::fail("schema judged inconsistent with the description"));
        }
        Ok(Verdict::pass())
    }

    fn verify_local(&self, parent: &Bundle, child: &Bundle, action_text: &str) -> Result<Verdict, ProposerError> {
        self.counters.bump(CallKind::VerifyLocal);
        let verdict = (|| {
            let before = self.parse_state(&parent.state_text).map_err(|e| format!("parent state: {e}"))?;
            let after = self.parse_state(&child.state_text).map_err(|e| format!("child state: {e}"))?;
            let a = self.resolve(action_text).map_err(|e| e.to_string())?;
            if !applicable(&before, &a) {
                return Err(format!("`{action_text}` is not allowed here"));
            }
            let expect = apply(&before, &a).map_err(|e| e.to_string())?;
            if expect != after {
                return Err(format!("`{action_text}` does not lead to the described state"));
            }
            Ok(())
        })();
        Ok(match verdict {
            Err(c) => Verdict::fail(c),
            Ok(()) if self.flip(self.faults.local_false_negative_rate, "local", child.key, 0) => {
                Verdict::fail("action judged to violate the domain rules")
            }
            Ok(()) => Verdict::pass(),
        })
    }

    fn verify_global(&self, _init: &Bundle, child: &Bundle, _goal: &Bundle) -> Result<Verdict, ProposerError> {
        self.counters.bump(CallKind::VerifyGlobal);
        let states = match self.replay(&child.path) {
            Ok(s) => s,
            Err(i) => return Ok(Verdict::fail(format!("the path is infeasible at step {}", i + 1))),
        };
        let last = states.last().unwrap();
        match self.parse_state(&child.state_text) {
            Ok(s) if s == *last => {}
            _ => return Ok(Verdict::fail("the path does not lead to the described state")),
        }
        let d_child = self.oracle.distance(last);
        if d_child == GoalDistance::DeadEnd {
            return Ok(Verdict::fail("the goal can no longer be reached"));
        }
        let revisit = {
            let mut seen = FxHashSet::default();
            !states.iter().all(|s| seen.insert(s))
        };
        let decreased = states.len() >= 2 && d_child.sort_key() < self.oracle.distance(&states[states.len() - 2]).sort_key();
        if revisit && !decreased {
            return Ok(Verdict::fail("inefficient: the path revisits an earlier state"));
        }
        if self.flip(self.faults.global_false_negative_rate, "global", child.key, 0) {
            return Ok(Verdict::fail("path judged unlikely to reach the goal"));
        }
        Ok(Verdict::pass())
    }

    fn check_goal(&self, node: &Bundle, _goal: &Bundle) -> Result<bool, ProposerError> {
        self.counters.bump(CallKind::CheckGoal);
        Ok(match self.parse_state(&node.state_text) {
            Ok(s) => self.problem.goal_satisfied(&s),
            Err(_) => false,
        })
    }

    fn rank_states(&self, candidates: &[&Bundle], _goal: &Bundle) -> Result<Vec<usize>, ProposerError> {
        self.counters.bump(CallKind::RankStates);
        if candidates.is_empty() {
            return Err(ProposerError::EmptyCandidates);
        }
        let mut keyed: Vec<(u32, u64, usize)> = candidates
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let d = match self.parse_state(&b.state_text) {
                    Ok(s) => self.oracle.distance(&s).sort_key(),
                    Err(_) => u32::MAX,
                };
                (d, b.id, i)
            })
            .collect();
        keyed.sort();
        let mut order: Vec<usize> = keyed.into_iter().map(|(_, _, i)| i).collect();
        if self.faults.ranking_noise > 0.0 {
            let ids = candidates.iter().fold(0u64, |h, b| splitmix(h ^ b.id));
            let mut rng = call_rng(self.faults.seed, "rank", ids, candidates.len() as u64, 0);
            for i in 0..order.len().saturating_sub(1) {
                if rng.random::<f64>() < self.faults.ranking_noise {
                    order.swap(i, i + 1);
                }
            }
        }
        Ok(order)
    }

    fn counters(&self) -> &CallCounters {
        &self.counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_problem, GroundAtom};

    fn tower() -> OracleProposer {
        let d = DomainId::Blocksworld.domain();
        let p = parse_problem(
            "(define (problem t) (:domain blocksworld) (:objects a b - block)
             (:init (on a b) (ontable b) (clear a) (handempty)) (:goal (and (on b a))))",
            &d,
        )
        .unwrap();
        OracleProposer::new(DomainId::Blocksworld, p, FaultModel::none(7))
    }

    fn root(o: &OracleProposer) -> Bundle {
        Bundle {
            state_text: o.state_text(&o.problem().init),
            ..Bundle::default()
        }
    }

    #[test]
    fn first_proposal_follows_the_shortest_plan() {
        let o = tower();
        let r = root(&o);
        let p = o.propose_action(&r, &Bundle::default(), 0).unwrap();
        assert_eq!(p.action_text, "unstack block a from block b");
        let next = o.parse_state(&p.next_state_text).unwrap();
        assert!(next.contains(&GroundAtom::new("holding", &["a"])));
        // Only one action applies, so every sample index agrees.
        assert_eq!(o.propose_action(&r, &Bundle::default(), 1).unwrap(), p);
    }

    #[test]
    fn forced_invalid_actions_are_inapplicable() {
        let mut o = tower();
        o.faults.invalid_action_rate = 1.0;
        let r = root(&o);
        for i in 0..4 {
            let p = o.propose_action(&r, &Bundle::default(), i).unwrap();
            let a = o.resolve(&p.action_text).unwrap();
            assert!(!applicable(&o.problem().init, &a));
        }
    }

    #[test]
    fn local_check_agrees_with_the_simulator() {
        let o = tower();
        let r = root(&o);
        let p = o.propose_action(&r, &Bundle::default(), 0).unwrap();
        let child = Bundle {
            key: 1,
            state_text: p.next_state_text.clone(),
            path: vec![p.action_text.clone()],
            ..Bundle::default()
        };
        assert!(o.verify_local(&r, &child, &p.action_text).unwrap().pass);
        let v = o.verify_local(&r, &child, "pick up block b").unwrap();
        assert!(!v.pass && !v.critique.is_empty());
        assert!(o.verify_global(&r, &child, &Bundle::default()).unwrap().pass);
        assert!(!o.check_goal(&child, &Bundle::default()).unwrap());
    }

    #[test]
    fn revisiting_paths_fail_the_global_check() {
        let o = tower();
        let path = vec!["unstack block a from block b".to_string(), "stack block a on block b".to_string()];
        let child = Bundle {
            state_text: o.state_text(&o.problem().init),
            path,
            ..Bundle::default()
        };
        let v = o.verify_global(&root(&o), &child, &Bundle::default()).unwrap();
        assert!(!v.pass);
        assert!(v.critique.contains("inefficient"));
    }

    #[test]
    fn ranking_is_by_distance_then_id() {
        let o = tower();
        let init = o.problem().init.clone();
        let held = apply(&init, &o.resolve("unstack block a from block b").unwrap()).unwrap();
        let down = apply(&held, &o.resolve("put down block a").unwrap()).unwrap();
        let mk = |id, s: &State| Bundle {
            id,
            state_text: o.state_text(s),
            ..Bundle::default()
        };
        let (a, b, c) = (mk(0, &init), mk(1, &down), mk(2, &held));
        // distances 4, 2, 3
        assert_eq!(o.rank_states(&[&a, &b, &c], &Bundle::default()).unwrap(), vec![1, 2, 0]);
        assert!(o.rank_states(&[], &Bundle::default()).is_err());
    }

    #[test]
    fn forced_ranking_noise_swaps_equal_candidates() {
        let mut o = tower();
        o.faults.ranking_noise = 1.0;
        let r0 = Bundle { id: 0, ..root(&o) };
        let r1 = Bundle { id: 1, ..root(&o) };
        assert_eq!(o.rank_states(&[&r0, &r1], &Bundle::default()).unwrap(), vec![1, 0]);
    }

    #[test]
    fn reflection_names_misplaced_objects() {
        let o = tower();
        let style = StyleMap::default_for(DomainId::Blocksworld);
        let text = o.state_text(&o.problem().init);
        let good = DiagramSchema::parse(&o.make_schema(0, &text, None, &style).unwrap()).unwrap();
        assert!(o.reflect_schema(0, 0, &good, &text, None, &style).unwrap().pass);
        let mut bad = good.clone();
        bad.objects[0].position = crate::diagram::Position::Absolute { x: 6.0, y: 0.0 };
        let v = o.reflect_schema(0, 0, &bad, &text, None, &style).unwrap();
        assert!(!v.pass && v.critique.contains('a'));
    }
}
