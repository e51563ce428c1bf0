//! Independent checks shared by the integration tests and the acceptance
//! run. They replay plans on the bit-set simulator rather than through the
//! validator, and compare ground actions structurally.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vplan_core::nl::{plan_to_pddl, PhraseTable};
use vplan_core::pddl::{ground_relevant, resolve_step, validate_plan, DomainDef, GroundAction, Plan, PlanStep, ProblemDef, Verdict};
use vplan_core::sim::{bfs_plan, gen_instance, DomainId, GenParams, Size, Task};

pub fn smallest(id: DomainId, seed: u64) -> ProblemDef {
    gen_instance(id, &GenParams::new(Size::smallest(id), seed)).unwrap()
}

/// A uniformly drawn action schema with a uniformly drawn, type-correct
/// object per parameter. Most such actions are inapplicable anywhere.
pub fn random_ground_action(rng: &mut ChaCha8Rng, domain: &DomainDef, problem: &ProblemDef) -> GroundAction {
    let schema = domain.actions.choose(rng).unwrap();
    let args = schema
        .params
        .iter()
        .map(|p| {
            let objs: Vec<&str> = problem.objects_of(domain, &p.ty).collect();
            objs.choose(rng).unwrap().to_string()
        })
        .collect();
    let step = PlanStep {
        name: schema.name.clone(),
        args,
    };
    resolve_step(domain, problem, &step).unwrap()
}

/// Replay on the simulator: `Ok(())` when the plan reaches the goal,
/// `Err((step, verdict))` at the first failure.
pub fn replay(task: &Task, plan: &[GroundAction]) -> Result<(), (usize, Verdict)> {
    let mut bits = task.init().clone();
    for (i, a) in plan.iter().enumerate() {
        match task.action_index(a) {
            Some(idx) if task.applicable(&bits, idx) => bits = task.apply(&bits, idx),
            _ => return Err((i, Verdict::PreconditionFailure)),
        }
    }
    if task.is_goal(&bits) {
        Ok(())
    } else {
        Err((plan.len(), Verdict::GoalUnsatisfied))
    }
}

/// A BFS plan (or a prefix of it) with one random edit.
pub fn mutated_plan(rng: &mut ChaCha8Rng, base: &[GroundAction], all: &[GroundAction]) -> Vec<GroundAction> {
    let mut p = base.to_vec();
    match rng.random_range(0..6) {
        0 => {}
        1 => p.truncate(rng.random_range(0..=p.len())),
        2 if !p.is_empty() => {
            p.remove(rng.random_range(0..p.len()));
        }
        3 if p.len() > 1 => {
            let (i, j) = (rng.random_range(0..p.len()), rng.random_range(0..p.len()));
            p.swap(i, j);
        }
        4 if !p.is_empty() => {
            let i = rng.random_range(0..p.len());
            p[i] = all.choose(rng).unwrap().clone();
        }
        _ => {
            let i = rng.random_range(0..=p.len());
            p.insert(i, all.choose(rng).unwrap().clone());
        }
    }
    p
}

/// Number of disagreements between validate_plan and the simulator replay
/// over `count` mutated plans.
pub fn validator_disagreements(id: DomainId, count: usize, seed: u64) -> usize {
    let domain = id.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut instances = Vec::new();
    for s in 0..5 {
        let p = smallest(id, seed * 100 + s);
        let plan = bfs_plan(&domain, &p, 30).expect("generated instances are solvable");
        let mut all = ground_relevant(&domain, &p);
        for _ in 0..50 {
            all.push(random_ground_action(&mut rng, &domain, &p));
        }
        let task = Task::new(&domain, &p);
        instances.push((p, plan, all, task));
    }
    for i in 0..count {
        let (p, base, all, task) = &instances[i % instances.len()];
        let plan = mutated_plan(&mut rng, base, all);
        let report = validate_plan(&domain, p, &Plan::from_actions(&plan));
        let expected = replay(task, &plan);
        let agree = match expected {
            Ok(()) => report.is_valid(),
            Err((step, verdict)) => report.verdict == verdict && report.failing_step == Some(step),
        };
        if !agree {
            bad += 1;
        }
    }
    bad
}

/// Round-trip failures for `count` random ground actions.
pub fn nl_round_trip_failures(id: DomainId, count: usize, seed: u64) -> usize {
    let domain = id.domain();
    let table = PhraseTable::for_domain(id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<ProblemDef> = (0..7)
        .map(|i| gen_instance(id, &GenParams::small(id, seed + i)).unwrap())
        .collect();
    let mut bad = 0;
    for i in 0..count {
        let p = &problems[i % problems.len()];
        let a = &random_ground_action(&mut rng, &domain, p);
        let ok = table
            .ground_action_text(a)
            .ok()
            .and_then(|t| plan_to_pddl(&[t], &domain, p, &table).ok())
            .map(|plan| {
                plan.steps
                    == vec![PlanStep {
                        name: a.name.clone(),
                        args: a.args.clone(),
                    }]
            })
            .unwrap_or(false);
        if !ok {
            bad += 1;
        }
    }
    bad
}
