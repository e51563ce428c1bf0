//! The six built-in domains, instance generators, successor generation and
//! breadth-first goal distances.

mod gen;
mod oracle;
mod task;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use gen::{gen_instance, GenError, GenParams, Size};
pub(crate) use gen::splitmix;
pub use oracle::{DistanceOracle, GoalDistance};
pub use task::{BfsOutcome, Bits, Task};

use crate::pddl::{applicable, apply, parse_domain, DomainDef, GroundAction, ProblemDef, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DomainId {
    Blocksworld,
    Barman,
    Elevator,
    Parking,
    Tetris,
    Floortile,
}

impl DomainId {
    pub const ALL: [DomainId; 6] = [
        DomainId::Blocksworld,
        DomainId::Barman,
        DomainId::Elevator,
        DomainId::Parking,
        DomainId::Tetris,
        DomainId::Floortile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::Blocksworld => "blocksworld",
            DomainId::Barman => "barman",
            DomainId::Elevator => "elevator",
            DomainId::Parking => "parking",
            DomainId::Tetris => "tetris",
            DomainId::Floortile => "floortile",
        }
    }

    /// Corpus PDDL source.
    pub fn domain_source(self) -> &'static str {
        match self {
            DomainId::Blocksworld => include_str!("../../domains/blocksworld/domain.pddl"),
            DomainId::Barman => include_str!("../../domains/barman/domain.pddl"),
            DomainId::Elevator => include_str!("../../domains/elevator/domain.pddl"),
            DomainId::Parking => include_str!("../../domains/parking/domain.pddl"),
            DomainId::Tetris => include_str!("../../domains/tetris/domain.pddl"),
            DomainId::Floortile => include_str!("../../domains/floortile/domain.pddl"),
        }
    }

    /// Phrase table used for natural-language translation.
    pub fn phrase_source(self) -> &'static str {
        match self {
            DomainId::Blocksworld => include_str!("../../domains/blocksworld/phrases.txt"),
            DomainId::Barman => include_str!("../../domains/barman/phrases.txt"),
            DomainId::Elevator => include_str!("../../domains/elevator/phrases.txt"),
            DomainId::Parking => include_str!("../../domains/parking/phrases.txt"),
            DomainId::Tetris => include_str!("../../domains/tetris/phrases.txt"),
            DomainId::Floortile => include_str!("../../domains/floortile/phrases.txt"),
        }
    }

    pub fn domain(self) -> DomainDef {
        parse_domain(self.domain_source()).expect("corpus domains parse")
    }

    /// Look up a domain by the name used in its PDDL `(domain ...)` header.
    pub fn from_domain_name(name: &str) -> Option<DomainId> {
        DomainId::ALL.into_iter().find(|d| d.as_str() == name)
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown domain `{0}` (expected one of: blocksworld, barman, elevator, parking, tetris, floortile)")]
pub struct UnknownDomain(pub String);

impl FromStr for DomainId {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainId::from_domain_name(&s.to_ascii_lowercase()).ok_or_else(|| UnknownDomain(s.to_string()))
    }
}

/// The corpus domain together with its template natural-language rules.
pub fn load_domain(id: DomainId) -> (DomainDef, String) {
    let domain = id.domain();
    let table = crate::nl::PhraseTable::for_domain(id);
    let text = crate::nl::domain_to_nl(&domain, &table).expect("corpus phrase tables cover their domains");
    (domain, text)
}

/// Seeded fault injection for the oracle proposer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultModel {
    pub invalid_action_rate: f64,
    pub local_false_negative_rate: f64,
    pub global_false_negative_rate: f64,
    pub ranking_noise: f64,
    pub seed: u64,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            invalid_action_rate: 0.0,
            local_false_negative_rate: 0.0,
            global_false_negative_rate: 0.0,
            ranking_noise: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("fault rate `{name}` = {value} is outside [0, 1]")]
pub struct RateError {
    pub name: &'static str,
    pub value: f64,
}

impl FaultModel {
    pub fn none(seed: u64) -> Self {
        FaultModel {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        for (name, value) in [
            ("invalid_action_rate", self.invalid_action_rate),
            ("local_false_negative_rate", self.local_false_negative_rate),
            ("global_false_negative_rate", self.global_false_negative_rate),
            ("ranking_noise", self.ranking_noise),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(RateError { name, value });
            }
        }
        Ok(())
    }
}

/// Applicable actions of `grounded` in `state`, in the given order, with
/// their successor states.
pub fn successors(state: &State, grounded: &[GroundAction]) -> Vec<(GroundAction, State)> {
    grounded
        .iter()
        .filter(|a| applicable(state, a))
        .map(|a| (a.clone(), apply(state, a).expect("checked applicable")))
        .collect()
}

/// Node limit for the reference BFS solver.
pub const BFS_NODE_LIMIT: usize = 2_000_000;

/// Length of a shortest plan if it is at most `cap`.
pub fn bfs_distance(domain: &DomainDef, problem: &ProblemDef, cap: usize) -> Option<usize> {
    bfs_plan(domain, problem, cap).map(|p| p.len())
}

/// A shortest plan of at most `cap` steps.
pub fn bfs_plan(domain: &DomainDef, problem: &ProblemDef, cap: usize) -> Option<Vec<GroundAction>> {
    let task = Task::new(domain, problem);
    match task.bfs(task.init(), Some(cap), BFS_NODE_LIMIT) {
        BfsOutcome::Found(plan) => Some(plan.into_iter().map(|a| task.action(a).clone()).collect()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{ground, parse_problem, GroundAtom};

    #[test]
    fn corpus_action_sets() {
        let names = |id: DomainId| -> Vec<String> {
            let mut v: Vec<String> = id.domain().actions.iter().map(|a| a.name.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(names(DomainId::Blocksworld), ["pick-up", "put-down", "stack", "unstack"]);
        assert_eq!(
            names(DomainId::Floortile),
            ["change-color", "down", "left", "paint-down", "paint-up", "right", "up"]
        );
        assert_eq!(names(DomainId::Elevator).len(), 6);
        assert_eq!(names(DomainId::Tetris).len(), 6);
        assert_eq!(names(DomainId::Parking).len(), 4);
        assert_eq!(names(DomainId::Barman).len(), 12);
    }

    fn two_blocks(goal: &str) -> (DomainDef, ProblemDef) {
        let d = DomainId::Blocksworld.domain();
        let p = parse_problem(
            &format!(
                "(define (problem two) (:domain blocksworld) (:objects a b - block)
                  (:init (ontable a) (ontable b) (clear a) (clear b) (handempty)) (:goal {goal}))"
            ),
            &d,
        )
        .unwrap();
        (d, p)
    }

    #[test]
    fn bfs_distances() {
        let (d, p) = two_blocks("(on a b)");
        assert_eq!(bfs_distance(&d, &p, 30), Some(2));
        assert_eq!(bfs_distance(&d, &p, 1), None);
        let (d, p) = two_blocks("(ontable a)");
        assert_eq!(bfs_distance(&d, &p, 0), Some(0));
    }

    #[test]
    fn successors_of_table_state_are_pickups() {
        let d = DomainId::Blocksworld.domain();
        let p = parse_problem(
            "(define (problem three) (:domain blocksworld) (:objects a b c - block)
              (:init (ontable a) (ontable b) (ontable c) (clear a) (clear b) (clear c) (handempty))
              (:goal (on a b)))",
            &d,
        )
        .unwrap();
        let grounded: Vec<GroundAction> = ground(&d, &p).iter().collect();
        let succ = successors(&p.init, &grounded);
        let sigs: Vec<String> = succ.iter().map(|(a, _)| a.signature()).collect();
        assert_eq!(sigs, ["(pick-up a)", "(pick-up b)", "(pick-up c)"]);

        let holding = succ[0].1.clone();
        let sigs: Vec<String> = successors(&holding, &grounded)
            .iter()
            .map(|(a, _)| a.signature())
            .collect();
        assert_eq!(sigs, ["(put-down a)", "(stack a b)", "(stack a c)"]);
        assert!(successors(&holding, &[]).is_empty());
        assert!(holding.contains(&GroundAtom::new("holding", &["a"])));
    }

    #[test]
    fn compiled_task_agrees_with_plain_successors() {
        let d = DomainId::Blocksworld.domain();
        let p = parse_problem(
            "(define (problem three) (:domain blocksworld) (:objects a b c - block)
              (:init (on a b) (ontable b) (ontable c) (clear a) (clear c) (handempty))
              (:goal (on c a)))",
            &d,
        )
        .unwrap();
        let grounded: Vec<GroundAction> = ground(&d, &p).iter().collect();
        let task = Task::new(&d, &p);
        let (states, _) = task.reachable(10_000).unwrap();
        assert_eq!(states.len(), 22);
        for b in &states {
            let s = task.decode(b);
            let plain: Vec<(String, State)> = successors(&s, &grounded)
                .into_iter()
                .map(|(a, n)| (a.signature(), n))
                .collect();
            let fast: Vec<(String, State)> = task
                .successors(b)
                .into_iter()
                .map(|(a, n)| (task.action(a).signature(), task.decode(&n)))
                .collect();
            assert_eq!(plain, fast);
        }
    }

    #[test]
    fn domain_ids_parse() {
        assert_eq!("Parking".parse::<DomainId>(), Ok(DomainId::Parking));
        assert!("sokoban".parse::<DomainId>().is_err());
    }
}
