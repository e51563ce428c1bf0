use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{
    DepthLedger, Instance, NodeStatus, Outcome, RoundTrace, SearchConfig, SearchError, SearchNode, SearchResult,
    SearchStats,
};
use crate::diagram::{check_schema, render, DiagramSchema, StyleMap};
use crate::nl::{state_to_nl, NEGATION};
use crate::proposer::{canonical_action, Bundle, DiagramPayload, Proposer};
use crate::sim::splitmix;

/// Randomness key of a child; depends only on the parent key and sample.
pub fn child_key(parent_key: u64, sample: usize) -> u64 {
    splitmix(parent_key ^ splitmix(sample as u64 + 1).rotate_left(17))
}

/// Key a parent expands under on its `round`-th expansion, so that a
/// backtracking retry samples fresh children.
fn expansion_key(parent_key: u64, round: u32) -> u64 {
    match round {
        0 => parent_key,
        r => splitmix(parent_key ^ (r as u64).rotate_left(41)),
    }
}

/// The root node and the goal descriptor. The goal is only compared
/// against, never expanded.
#[derive(Debug, Clone)]
pub struct Endpoints {
    pub root: SearchNode,
    pub goal: Bundle,
    pub goal_svg: Option<String>,
}

struct DiagramParts {
    schema: Option<String>,
    diagram: Option<DiagramPayload>,
    svg: Option<String>,
    attempts: Vec<(Option<String>, String)>,
}

/// Schema generation with checks, reflection and regeneration, then
/// rendering. On failure returns the failed attempts.
#[allow(clippy::too_many_arguments)]
fn build_diagram(
    proposer: &dyn Proposer,
    cfg: &SearchConfig,
    objects: &[String],
    style: &StyleMap,
    key: u64,
    state_text: &str,
    action: Option<&str>,
) -> Result<DiagramParts, Vec<(Option<String>, String)>> {
    let mut attempts = Vec::new();
    if cfg.no_diagram {
        return Ok(DiagramParts {
            schema: None,
            diagram: None,
            svg: None,
            attempts,
        });
    }
    for attempt in 0..=cfg.schema_retries {
        let text = match proposer.make_schema(key, state_text, action, style) {
            Ok(t) => t,
            Err(e) => {
                attempts.push((None, e.to_string()));
                continue;
            }
        };
        let schema = match DiagramSchema::parse(&text) {
            Ok(s) => s,
            Err(e) => {
                attempts.push((Some(text), e.to_string()));
                continue;
            }
        };
        if !cfg.no_schema {
            let violations = check_schema(&schema, objects);
            if !violations.is_empty() {
                let msg = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
                attempts.push((Some(text), msg));
                continue;
            }
            match proposer.reflect_schema(key, attempt, &schema, state_text, action, style) {
                Ok(v) if v.pass => {}
                Ok(v) => {
                    attempts.push((Some(text), v.critique));
                    continue;
                }
                Err(e) => {
                    attempts.push((Some(text), e.to_string()));
                    continue;
                }
            }
        }
        let rendered = match render(&schema) {
            Ok(r) => r,
            Err(e) => {
                attempts.push((Some(text), e.to_string()));
                continue;
            }
        };
        let payload = if cfg.code_as_context {
            DiagramPayload::Source(rendered.svg.clone())
        } else {
            DiagramPayload::Image(rendered.svg.clone())
        };
        return Ok(DiagramParts {
            schema: (!cfg.no_schema).then_some(text),
            diagram: Some(payload),
            svg: Some(rendered.svg),
            attempts,
        });
    }
    Err(attempts)
}

/// Goal description: one sentence per goal literal.
fn goal_text(inst: &Instance) -> Result<String, SearchError> {
    let mut out = String::new();
    for a in &inst.problem.goal_pos {
        out.push_str(&inst.table.atom_sentence(a)?);
        out.push_str(".\n");
    }
    for a in &inst.problem.goal_neg {
        out.push_str(NEGATION);
        out.push_str(&inst.table.atom_sentence(a)?);
        out.push_str(".\n");
    }
    Ok(out)
}

/// Describe and draw the initial and goal states.
pub fn init_endpoints(
    inst: &Instance,
    style: &StyleMap,
    proposer: &dyn Proposer,
    cfg: &SearchConfig,
) -> Result<Endpoints, SearchError> {
    let objects = inst.object_ids();
    let root_key = splitmix(cfg.seed);
    let state_text = state_to_nl(&inst.problem.init, inst.domain, inst.table)?;
    let root_parts = build_diagram(proposer, cfg, &objects, style, root_key, &state_text, None).map_err(|a| {
        SearchError::SchemaFailure {
            which: "initial",
            attempts: a.len(),
            last: a.last().map(|x| x.1.clone()).unwrap_or_default(),
        }
    })?;
    let goal_key = splitmix(root_key ^ 0x676f_616c);
    let gtext = goal_text(inst)?;
    let goal_parts = build_diagram(proposer, cfg, &objects, style, goal_key, &gtext, None).map_err(|a| {
        SearchError::SchemaFailure {
            which: "goal",
            attempts: a.len(),
            last: a.last().map(|x| x.1.clone()).unwrap_or_default(),
        }
    })?;
    let root = SearchNode {
        id: 0,
        depth: 0,
        parent: None,
        action: None,
        sample_index: 0,
        status: NodeStatus::Validated,
        bundle: Bundle {
            id: 0,
            key: root_key,
            state_text,
            schema: root_parts.schema,
            diagram: root_parts.diagram,
            path: Vec::new(),
        },
        svg: root_parts.svg,
        verdicts: Vec::new(),
        attempts: root_parts.attempts,
    };
    let goal = Bundle {
        id: u64::MAX,
        key: goal_key,
        state_text: gtext,
        schema: goal_parts.schema,
        diagram: goal_parts.diagram,
        path: Vec::new(),
    };
    Ok(Endpoints {
        root,
        goal,
        goal_svg: goal_parts.svg,
    })
}

struct Draft {
    sample_index: usize,
    action: Option<String>,
    bundle: Bundle,
    svg: Option<String>,
    status: NodeStatus,
    verdicts: Vec<String>,
    attempts: Vec<(Option<String>, String)>,
}

struct Ctx<'a> {
    proposer: &'a dyn Proposer,
    cfg: &'a SearchConfig,
    objects: Vec<String>,
    style: &'a StyleMap,
    root: Bundle,
    goal: Bundle,
}

/// The child pipeline for one parent: propose, dedup, draw, check.
fn expand_parent(ctx: &Ctx, parent: &SearchNode, round: u32) -> Vec<Draft> {
    let mut drafts = Vec::new();
    let mut seen = BTreeSet::new();
    for s in 0..ctx.cfg.n {
        let key = child_key(expansion_key(parent.bundle.key, round), s);
        let proposal = match ctx.proposer.propose_action(&parent.bundle, &ctx.goal, s) {
            Ok(p) => p,
            Err(e) => {
                drafts.push(Draft {
                    sample_index: s,
                    action: None,
                    bundle: Bundle {
                        key,
                        path: parent.bundle.path.clone(),
                        ..Bundle::default()
                    },
                    svg: None,
                    status: NodeStatus::Invalid,
                    verdicts: vec![format!("propose: {e}")],
                    attempts: Vec::new(),
                });
                continue;
            }
        };
        if !seen.insert(canonical_action(&proposal.action_text)) {
            continue;
        }
        let mut path = parent.bundle.path.clone();
        path.push(proposal.action_text.clone());
        let mut draft = Draft {
            sample_index: s,
            action: Some(proposal.action_text.clone()),
            bundle: Bundle {
                id: 0,
                key,
                state_text: proposal.next_state_text.clone(),
                schema: None,
                diagram: None,
                path,
            },
            svg: None,
            status: NodeStatus::Candidate,
            verdicts: vec![format!("rationale: {}", proposal.rationale)],
            attempts: Vec::new(),
        };
        match build_diagram(
            ctx.proposer,
            ctx.cfg,
            &ctx.objects,
            ctx.style,
            key,
            &proposal.next_state_text,
            Some(&proposal.action_text),
        ) {
            Ok(parts) => {
                draft.bundle.schema = parts.schema;
                draft.bundle.diagram = parts.diagram;
                draft.svg = parts.svg;
                draft.attempts = parts.attempts;
            }
            Err(attempts) => {
                draft.attempts = attempts;
                draft.verdicts.push("schema: failed after retries".into());
                draft.status = NodeStatus::Invalid;
                drafts.push(draft);
                continue;
            }
        }
        let local = ctx.proposer.verify_local(&parent.bundle, &draft.bundle, &proposal.action_text);
        match local {
            Ok(v) if v.pass => draft.verdicts.push("local: pass".into()),
            Ok(v) => {
                draft.verdicts.push(format!("local: fail: {}", v.critique));
                draft.status = NodeStatus::Invalid;
            }
            Err(e) => {
                draft.verdicts.push(format!("local: error: {e}"));
                draft.status = NodeStatus::Invalid;
            }
        }
        if draft.status == NodeStatus::Candidate {
            match ctx.proposer.verify_global(&ctx.root, &draft.bundle, &ctx.goal) {
                Ok(v) if v.pass => draft.verdicts.push("global: pass".into()),
                Ok(v) => {
                    draft.verdicts.push(format!("global: fail: {}", v.critique));
                    draft.status = NodeStatus::Invalid;
                }
                Err(e) => {
                    draft.verdicts.push(format!("global: error: {e}"));
                    draft.status = NodeStatus::Invalid;
                }
            }
        }
        if draft.status == NodeStatus::Candidate {
            let goal = ctx.proposer.check_goal(&draft.bundle, &ctx.goal).unwrap_or(false);
            draft.verdicts.push(format!("goal: {}", if goal { "yes" } else { "no" }));
            draft.status = if goal { NodeStatus::Goal } else { NodeStatus::Validated };
        }
        drafts.push(draft);
    }
    drafts
}

fn chain(nodes: &[SearchNode], goal: u64) -> (Vec<u64>, Vec<String>) {
    let mut ids = vec![goal];
    let mut cur = goal;
    while let Some(p) = nodes[cur as usize].parent {
        ids.push(p);
        cur = p;
    }
    ids.reverse();
    let plan = ids.iter().filter_map(|&i| nodes[i as usize].action.clone()).collect();
    (ids, plan)
}

/// Run the search from prepared endpoints.
pub fn run_search(
    endpoints: &Endpoints,
    inst: &Instance,
    cfg: &SearchConfig,
    proposer: &dyn Proposer,
    style: &StyleMap,
) -> Result<SearchResult, SearchError> {
    cfg.validate().map_err(SearchError::Config)?;
    let ctx = Ctx {
        proposer,
        cfg,
        objects: inst.object_ids(),
        style,
        root: endpoints.root.bundle.clone(),
        goal: endpoints.goal.clone(),
    };
    let pool = if cfg.workers > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().ok()
    } else {
        None
    };
    let mut nodes = vec![endpoints.root.clone()];
    // How often each node has been expanded.
    let mut expansions: Vec<u32> = vec![0];
    let mut ledger = DepthLedger::default();
    let mut stats = SearchStats::default();
    let mut rankings = Vec::new();
    ledger.record(0, &[0], &[0]);

    let finish = |outcome, nodes: Vec<SearchNode>, mut stats: SearchStats, rankings, ledger, goal: Option<u64>| {
        stats.calls = proposer.counters().snapshot();
        stats.max_depth_reached = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let (goal_chain, plan) = match goal {
            Some(g) => chain(&nodes, g),
            None => (Vec::new(), Vec::new()),
        };
        Ok(SearchResult {
            outcome,
            plan,
            goal_chain,
            stats,
            nodes,
            rankings,
            ledger,
        })
    };

    if proposer.check_goal(&endpoints.root.bundle, &endpoints.goal)? {
        nodes[0].status = NodeStatus::Goal;
        return finish(Outcome::Solved, nodes, stats, rankings, ledger, Some(0));
    }

    let beam = if cfg.no_beam { usize::MAX } else { cfg.k };
    let mut frontier: Vec<u64> = vec![0];
    loop {
        if frontier.is_empty() {
            if cfg.no_backtrack {
                return finish(Outcome::Incomplete, nodes, stats, rankings, ledger, None);
            }
            let Some(step) = ledger.backtrack(beam, cfg.backtracks) else {
                return finish(Outcome::Incomplete, nodes, stats, rankings, ledger, None);
            };
            for (_, ids) in &step.abandoned {
                for &i in ids {
                    nodes[i as usize].status = NodeStatus::Invalid;
                }
            }
            stats.backtracks += 1;
            frontier = step.frontier;
        }
        if stats.states_generated >= cfg.max_states {
            return finish(Outcome::Incomplete, nodes, stats, rankings, ledger, None);
        }
        let depth = nodes[frontier[0] as usize].depth;
        let parents: Vec<(SearchNode, u32)> = frontier
            .iter()
            .map(|&i| (nodes[i as usize].clone(), expansions[i as usize]))
            .collect();
        for &i in &frontier {
            nodes[i as usize].status = NodeStatus::Exhausted;
            expansions[i as usize] += 1;
        }
        frontier.clear();
        if depth >= cfg.max_depth {
            continue;
        }

        let results: Vec<Vec<Draft>> = match &pool {
            Some(p) => p.install(|| parents.par_iter().map(|(n, r)| expand_parent(&ctx, n, *r)).collect()),
            None => parents.iter().map(|(n, r)| expand_parent(&ctx, n, *r)).collect(),
        };

        let mut created = 0;
        let mut validated = Vec::new();
        let mut goal = None;
        'commit: for ((parent, _), drafts) in parents.iter().zip(results) {
            for d in drafts {
                if stats.states_generated >= cfg.max_states {
                    break 'commit;
                }
                let id = nodes.len() as u64;
                let mut bundle = d.bundle;
                bundle.id = id;
                expansions.push(0);
                nodes.push(SearchNode {
                    id,
                    depth: depth + 1,
                    parent: Some(parent.id),
                    action: d.action,
                    sample_index: d.sample_index,
                    status: d.status,
                    bundle,
                    svg: d.svg,
                    verdicts: d.verdicts,
                    attempts: d.attempts,
                });
                stats.states_generated += 1;
                created += 1;
                match d.status {
                    NodeStatus::Goal => {
                        goal = Some(id);
                        break 'commit;
                    }
                    NodeStatus::Validated => validated.push(id),
                    _ => {}
                }
            }
        }
        stats.rounds.push(RoundTrace {
            depth,
            parents: parents.len(),
            children: created,
        });
        if let Some(g) = goal {
            return finish(Outcome::Solved, nodes, stats, rankings, ledger, Some(g));
        }
        if validated.is_empty() {
            continue;
        }
        let bundles: Vec<&Bundle> = validated.iter().map(|&i| &nodes[i as usize].bundle).collect();
        let order = proposer
            .rank_states(&bundles, &endpoints.goal)
            .unwrap_or_else(|_| (0..validated.len()).collect());
        let ranked: Vec<u64> = order.iter().map(|&i| validated[i]).collect();
        frontier = ranked.iter().copied().take(beam).collect();
        ledger.record(depth + 1, &ranked, &frontier);
        rankings.push((depth + 1, ranked));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nl::PhraseTable;
    use crate::pddl::{parse_problem, DomainDef, ProblemDef};
    use crate::proposer::OracleProposer;
    use crate::search::base_style;
    use crate::sim::{bfs_distance, DomainId, FaultModel};

    struct Fixture {
        domain: DomainDef,
        problem: ProblemDef,
        table: PhraseTable,
    }

    impl Fixture {
        fn new(problem: &str) -> Fixture {
            let domain = DomainId::Blocksworld.domain();
            let problem = parse_problem(problem, &domain).unwrap();
            Fixture {
                domain,
                problem,
                table: PhraseTable::for_domain(DomainId::Blocksworld),
            }
        }

        fn inst(&self) -> Instance<'_> {
            Instance {
                domain: &self.domain,
                problem: &self.problem,
                table: &self.table,
            }
        }

        fn run(&self, cfg: &SearchConfig, faults: FaultModel) -> (Endpoints, SearchResult) {
            let proposer = OracleProposer::new(DomainId::Blocksworld, self.problem.clone(), faults);
            let style = base_style(&self.domain);
            let ends = init_endpoints(&self.inst(), &style, &proposer, cfg).unwrap();
            let res = run_search(&ends, &self.inst(), cfg, &proposer, &style).unwrap();
            (ends, res)
        }
    }

    const FLAT: &str = "(define (problem flat) (:domain blocksworld) (:objects a b c - block)
        (:init (ontable a) (ontable b) (ontable c) (clear a) (clear b) (clear c) (handempty))
        (:goal (and (on a b) (on b c))))";

    const ONE_MOVE: &str = "(define (problem one) (:domain blocksworld) (:objects a b c - block)
        (:init (ontable a) (ontable b) (ontable c) (clear a) (clear b) (clear c) (handempty))
        (:goal (and (on a b))))";

    fn depth_one(res: &SearchResult) -> Vec<&SearchNode> {
        res.nodes.iter().filter(|n| n.depth == 1).collect()
    }

    #[test]
    fn root_children_are_the_applicable_actions() {
        let f = Fixture::new(FLAT);
        let (ends, res) = f.run(&SearchConfig::for_domain(DomainId::Blocksworld), FaultModel::none(1));
        assert_eq!(ends.root.depth, 0);
        assert_eq!(ends.root.status, NodeStatus::Validated);
        assert_eq!(res.nodes[0].status, NodeStatus::Exhausted);
        // three pick-ups apply; the fourth sample repeats one and is dropped
        let first = depth_one(&res);
        assert_eq!(first.len(), 3);
        assert!(first.iter().all(|n| n.svg.is_some() && n.bundle.schema.is_some()));
        assert_eq!(res.stats.rounds[0].children, 3);
    }

    #[test]
    fn oracle_finds_the_shortest_plan() {
        let f = Fixture::new(ONE_MOVE);
        let best = bfs_distance(&f.domain, &f.problem, 30).unwrap();
        assert_eq!(best, 2);
        let (_, res) = f.run(&SearchConfig::default(), FaultModel::none(1));
        assert_eq!(res.outcome, Outcome::Solved);
        assert_eq!(res.plan, vec!["pick up block a", "stack block a on block b"]);
        assert_eq!(res.stats.max_depth_reached, 2);
        assert_eq!(res.goal_chain.len(), 3);
        assert_eq!(res.goal_chain[0], 0);
    }

    #[test]
    fn satisfied_goal_needs_no_expansion() {
        let f = Fixture::new(
            "(define (problem done) (:domain blocksworld) (:objects a b - block)
             (:init (on a b) (ontable b) (clear a) (handempty)) (:goal (and (on a b))))",
        );
        let (_, res) = f.run(&SearchConfig::default(), FaultModel::none(1));
        assert_eq!(res.outcome, Outcome::Solved);
        assert!(res.plan.is_empty());
        assert_eq!(res.stats.states_generated, 0);
    }

    #[test]
    fn state_budget_is_respected() {
        let f = Fixture::new(FLAT);
        let cfg = SearchConfig {
            max_states: 1,
            ..SearchConfig::default()
        };
        let (_, res) = f.run(&cfg, FaultModel::none(1));
        assert_eq!(res.outcome, Outcome::Incomplete);
        assert!(res.stats.states_generated <= 1);
        assert_eq!(res.nodes.len(), 2);
    }

    #[test]
    fn forced_local_rejections_leave_nothing_to_expand() {
        let f = Fixture::new(FLAT);
        let faults = FaultModel {
            local_false_negative_rate: 1.0,
            ..FaultModel::none(1)
        };
        // reflection shares the local rejection rate, so diagrams stay off
        let cfg = SearchConfig {
            no_backtrack: true,
            no_diagram: true,
            ..SearchConfig::default()
        };
        let (_, res) = f.run(&cfg, faults);
        assert_eq!(res.outcome, Outcome::Incomplete);
        let first = depth_one(&res);
        assert_eq!(first.len(), 3);
        assert!(first.iter().all(|n| n.status == NodeStatus::Invalid));
        assert!(first.iter().all(|n| n.verdicts.iter().any(|v| v.starts_with("local: fail"))));
    }

    #[test]
    fn backtracking_retries_the_root_with_fresh_samples() {
        let f = Fixture::new(FLAT);
        let faults = FaultModel {
            local_false_negative_rate: 1.0,
            ..FaultModel::none(1)
        };
        let cfg = SearchConfig {
            no_diagram: true,
            ..SearchConfig::default()
        };
        let (_, res) = f.run(&cfg, faults);
        assert_eq!(res.outcome, Outcome::Incomplete);
        // first expansion plus B = 2 retries
        assert_eq!(res.stats.backtracks, 2);
        assert_eq!(res.stats.rounds.len(), 3);
        let keys: BTreeSet<u64> = depth_one(&res).iter().map(|n| n.bundle.key).collect();
        assert_eq!(keys.len(), 9);
    }

    #[test]
    fn text_only_children_without_diagrams() {
        let f = Fixture::new(ONE_MOVE);
        let cfg = SearchConfig {
            no_diagram: true,
            ..SearchConfig::default()
        };
        let (ends, res) = f.run(&cfg, FaultModel::none(1));
        assert_eq!(res.outcome, Outcome::Solved);
        assert!(ends.goal.diagram.is_none());
        assert!(res.nodes.iter().all(|n| n.svg.is_none() && n.bundle.schema.is_none()));
    }

    #[test]
    fn code_as_context_carries_source_text() {
        let f = Fixture::new(ONE_MOVE);
        let cfg = SearchConfig {
            code_as_context: true,
            ..SearchConfig::default()
        };
        let (_, res) = f.run(&cfg, FaultModel::none(1));
        assert!(matches!(res.nodes[1].bundle.diagram, Some(DiagramPayload::Source(_))));
    }

    #[test]
    fn beam_and_budget_bounds_hold() {
        let f = Fixture::new(FLAT);
        for no_beam in [false, true] {
            let cfg = SearchConfig {
                no_beam,
                max_states: 60,
                ..SearchConfig::default()
            };
            let faults = FaultModel {
                ranking_noise: 0.5,
                local_false_negative_rate: 0.3,
                ..FaultModel::none(3)
            };
            let (_, res) = f.run(&cfg, faults);
            assert!(res.stats.states_generated <= 60);
            for r in &res.stats.rounds {
                assert!(r.children <= r.parents * cfg.n);
                if !no_beam {
                    assert!(r.parents <= cfg.k);
                }
            }
            for n in &res.nodes[1..] {
                assert_eq!(n.depth, res.nodes[n.parent.unwrap() as usize].depth + 1);
                assert!(n.parent.unwrap() < n.id);
            }
        }
    }

    #[test]
    fn parallel_expansion_matches_serial() {
        let f = Fixture::new(FLAT);
        let faults = FaultModel {
            ranking_noise: 0.3,
            local_false_negative_rate: 0.25,
            invalid_action_rate: 0.2,
            ..FaultModel::none(9)
        };
        let (_, a) = f.run(&SearchConfig::default(), faults);
        let (_, b) = f.run(
            &SearchConfig {
                workers: 4,
                ..SearchConfig::default()
            },
            faults,
        );
        assert_eq!(a.plan, b.plan);
        assert_eq!(a.stats.states_generated, b.stats.states_generated);
        assert_eq!(a.rankings, b.rankings);
        let sa: Vec<_> = a.nodes.iter().map(|n| (&n.bundle, n.status)).collect();
        let sb: Vec<_> = b.nodes.iter().map(|n| (&n.bundle, n.status)).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn run_directory_layout() {
        let f = Fixture::new(ONE_MOVE);
        let (ends, res) = f.run(&SearchConfig::default(), FaultModel::none(1));
        let dir = tempfile::tempdir().unwrap();
        crate::search::write_run_dir(dir.path(), &ends, &res).unwrap();
        let p = dir.path();
        for file in [
            "result.txt",
            "plan.nl.txt",
            "state_0/state.txt",
            "state_0/diagram.svg",
            "state_0/schema.txt",
            "state_1/info.txt",
            "goal_state/state.txt",
            "goal_state/diagram.svg",
            "ranking/depth_1.txt",
        ] {
            assert!(p.join(file).exists(), "{file}");
        }
        let info = std::fs::read_to_string(p.join("state_1/info.txt")).unwrap();
        assert!(info.contains("parent: 0"));
        assert!(info.contains("local: pass"));
        let result = std::fs::read_to_string(p.join("result.txt")).unwrap();
        assert!(result.starts_with("outcome: solved"));
    }
}
