mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vplan_core::bench::{run_instance, BenchConfig, RunOutcome};
use vplan_core::diagram::{check_schema, layout, schema_from_state, DiagramSchema, ObjectSpec, Position, Relation, Shape, StyleMap};
use vplan_core::nl::{instance_from_nl, instance_to_nl, PhraseTable};
use vplan_core::sim::{DomainId, FaultModel, GenParams, Task};

fn domain_strategy() -> impl Strategy<Value = DomainId> {
    prop::sample::select(DomainId::ALL.to_vec())
}

/// Absolute objects on a grid, each with a short chain of relative objects.
fn schema_strategy() -> impl Strategy<Value = DiagramSchema> {
    prop::collection::vec((0u8..5, 0u8..5, prop::collection::vec(0usize..5, 0..3)), 1..5).prop_map(|anchors| {
        let mut objects = Vec::new();
        let relations = [Relation::Above, Relation::Below, Relation::LeftOf, Relation::RightOf, Relation::Inside];
        for (i, (x, y, chain)) in anchors.into_iter().enumerate() {
            let id = format!("a{i}");
            objects.push(ObjectSpec {
                id: id.clone(),
                shape: Shape::Rectangle,
                color: "blue".into(),
                size: (1.0, 1.0),
                position: Position::Absolute {
                    x: 10.0 * x as f64,
                    y: 10.0 * y as f64,
                },
                status: None,
                label: id.clone(),
            });
            let mut prev = id;
            for (j, r) in chain.into_iter().enumerate() {
                let cid = format!("a{i}c{j}");
                objects.push(ObjectSpec {
                    id: cid.clone(),
                    shape: Shape::Circle,
                    color: "red".into(),
                    size: (0.5, 0.5),
                    position: Position::Relative {
                        relation: relations[r],
                        target: prev,
                        gap: 0.25,
                    },
                    status: None,
                    label: cid.clone(),
                });
                prev = cid;
            }
        }
        DiagramSchema {
            title: "t".into(),
            canvas: (60.0, 60.0),
            objects,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layout_commutes_with_translation(schema in schema_strategy(), dx in -20.0f64..20.0, dy in -20.0f64..20.0) {
        let base = layout(&schema).unwrap();
        let mut moved = schema.clone();
        for o in &mut moved.objects {
            if let Position::Absolute { x, y } = &mut o.position {
                *x += dx;
                *y += dy;
            }
        }
        let shifted = layout(&moved).unwrap();
        for ((ia, a), (ib, b)) in base.boxes.iter().zip(&shifted.boxes) {
            prop_assert_eq!(ia, ib);
            prop_assert!((a.x + dx - b.x).abs() < 1e-9 && (a.y + dy - b.y).abs() < 1e-9);
            prop_assert!((a.w - b.w).abs() < 1e-12 && (a.h - b.h).abs() < 1e-12);
        }
    }

    #[test]
    fn schema_text_round_trips(schema in schema_strategy()) {
        prop_assert_eq!(DiagramSchema::parse(&schema.to_text()).unwrap(), schema);
    }

    #[test]
    fn state_schemas_cover_every_object(id in domain_strategy(), seed in 0u64..1000, steps in 0usize..12) {
        let domain = id.domain();
        let problem = vplan_core::sim::gen_instance(id, &GenParams::small(id, seed)).unwrap();
        let task = Task::new(&domain, &problem);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = task.init().clone();
        for _ in 0..steps {
            let succ = task.successors(&bits);
            if succ.is_empty() {
                break;
            }
            bits = succ[rng.random_range(0..succ.len())].1.clone();
        }
        let state = task.decode(&bits);
        let schema = schema_from_state(&state, &problem, &domain, &StyleMap::default_for(id)).unwrap();
        let objects: Vec<String> = problem.objects.keys().cloned().collect();
        prop_assert_eq!(check_schema(&schema, &objects), vec![]);
        prop_assert_eq!(schema.objects.len(), objects.len());
    }

    #[test]
    fn instance_text_round_trips(id in domain_strategy(), seed in 0u64..1000) {
        let domain = id.domain();
        let table = PhraseTable::for_domain(id);
        let problem = vplan_core::sim::gen_instance(id, &GenParams::small(id, seed)).unwrap();
        let text = instance_to_nl(&problem, &table).unwrap();
        let back = instance_from_nl(&text, &domain, &table).unwrap();
        prop_assert_eq!(back.init, problem.init);
        prop_assert_eq!(back.goal_pos, problem.goal_pos);
        prop_assert_eq!(back.objects, problem.objects);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn validator_agrees_with_the_simulator(id in domain_strategy(), seed in 0u64..10_000) {
        prop_assert_eq!(common::validator_disagreements(id, 20, seed), 0);
    }

    #[test]
    fn actions_survive_translation(id in domain_strategy(), seed in 0u64..10_000) {
        prop_assert_eq!(common::nl_round_trip_failures(id, 20, seed), 0);
    }

    /// Under any fault mix the search stays within its budgets, and a plan
    /// it calls solved under zero faults is valid.
    #[test]
    fn search_respects_budgets(
        seed in 0u64..1000,
        fn_rate in 0.0f64..0.5,
        noise in 0.0f64..1.0,
        invalid in 0.0f64..0.5,
        no_beam in any::<bool>(),
        max_states in 1usize..80,
    ) {
        let id = DomainId::Blocksworld;
        let mut cfg = BenchConfig::new(id);
        cfg.search.no_beam = no_beam;
        cfg.search.max_states = max_states;
        cfg.faults = FaultModel {
            local_false_negative_rate: fn_rate,
            global_false_negative_rate: fn_rate / 2.0,
            ranking_noise: noise,
            invalid_action_rate: invalid,
            seed,
        };
        let rec = run_instance(id, seed, &cfg, None);
        prop_assert!(rec.error.is_none(), "{:?}", rec.error);
        prop_assert!(rec.states <= max_states);
        prop_assert!(rec.depth <= cfg.search.max_depth);
        // the oracle's checks reject every corrupted transition before they
        // count, so false negatives never turn into wrong plans
        prop_assert_ne!(rec.outcome, RunOutcome::Incorrect);
    }
}
