//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any
//! fails. Runs under `cargo test` with its own `main`.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vplan_core::bench::{ablation_config, run_pipeline, run_suite, BenchConfig, RunOutcome};
use vplan_core::diagram::{render, DiagramSchema};
use vplan_core::nl::{plan_to_pddl, PhraseTable};
use vplan_core::pddl::{ground_relevant, parse_problem, ProblemDef};
use vplan_core::proposer::{Bundle, OracleProposer, Proposer};
use vplan_core::search::{child_key, SearchConfig, SearchStats};
use vplan_core::sim::{bfs_distance, gen_instance, DomainId, FaultModel, GenParams, Size, Task};

struct Report {
    failed: usize,
    clock: Instant,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        let secs = self.clock.elapsed().as_secs_f64();
        self.clock = Instant::now();
        println!("{} {name}: {detail} ({secs:.1}s)", if ok { "PASS" } else { "FAIL" });
    }
}

/// Same pipeline as a bench run, but keeps the search statistics.
fn traced(id: DomainId, problem: &ProblemDef, cfg: &SearchConfig, faults: FaultModel) -> (RunOutcome, SearchStats) {
    let domain = id.domain();
    let table = PhraseTable::for_domain(id);
    let proposer = OracleProposer::new(id, problem.clone(), faults);
    let translate = |texts: &[String]| plan_to_pddl(texts, &domain, problem, &table);
    match run_pipeline(&domain, problem, &table, &proposer, cfg, None, &translate) {
        Ok(run) => (run.outcome, run.result.stats),
        Err(_) => (RunOutcome::Incomplete, SearchStats::default()),
    }
}

/// Returns a description of the first bound a trace breaks.
fn budget_violation(stats: &SearchStats, cfg: &SearchConfig) -> Option<String> {
    if stats.states_generated > cfg.max_states {
        return Some(format!("{} states > {}", stats.states_generated, cfg.max_states));
    }
    for r in &stats.rounds {
        if !cfg.no_beam && r.parents > cfg.k {
            return Some(format!("{} parents at depth {}", r.parents, r.depth));
        }
        if r.children > r.parents * cfg.n {
            return Some(format!("{} children from {} parents", r.children, r.parents));
        }
    }
    None
}

fn main() {
    let mut report = Report {
        failed: 0,
        clock: Instant::now(),
    };
    let mut traces: Vec<(SearchStats, SearchConfig)> = Vec::new();

    // Oracle end to end on the smallest sizes.
    let start = Instant::now();
    let runs: Vec<(DomainId, u64, RunOutcome, SearchStats, SearchConfig)> = DomainId::ALL
        .iter()
        .flat_map(|&id| (0..20u64).map(move |s| (id, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, seed)| {
            let cfg = SearchConfig::for_domain(id);
            let problem = common::smallest(id, seed);
            let (outcome, stats) = traced(id, &problem, &cfg, FaultModel::none(seed));
            (id, seed, outcome, stats, cfg)
        })
        .collect();
    let elapsed = start.elapsed();
    let failures: Vec<String> = runs
        .iter()
        .filter(|r| r.2 != RunOutcome::Correct)
        .map(|r| format!("{}#{}={}", r.0, r.1, r.2))
        .collect();
    report.line(
        "oracle end-to-end",
        failures.is_empty() && elapsed.as_secs() < 300,
        format!("{}/{} correct in {:.1}s {:?}", runs.len() - failures.len(), runs.len(), elapsed.as_secs_f64(), failures),
    );
    traces.extend(runs.into_iter().map(|r| (r.3, r.4)));

    // Validator against step-by-step replay.
    let disagreements: Vec<(DomainId, usize)> = DomainId::ALL
        .par_iter()
        .map(|&id| (id, common::validator_disagreements(id, 100, 11)))
        .collect();
    let total: usize = disagreements.iter().map(|d| d.1).sum();
    report.line(
        "validator-simulator equivalence",
        total == 0,
        format!("{total} disagreements over 600 plans"),
    );

    // Trends on 30 paired blocksworld seeds.
    let seeds: Vec<u64> = (0..30).collect();
    let bw = DomainId::Blocksworld;
    let base = BenchConfig::new(bw);

    let mut cfg = base.clone();
    cfg.faults.local_false_negative_rate = 0.25;
    let on = run_suite(bw, &seeds, &cfg);
    cfg.search = ablation_config("no_backtrack", &base.search).unwrap();
    let off = run_suite(bw, &seeds, &cfg);
    report.line(
        "backtracking trend",
        on.corrects() >= off.corrects() && off.incompletes() >= on.incompletes(),
        format!(
            "correct {} vs {} without, incomplete {} vs {} without",
            on.corrects(),
            off.corrects(),
            on.incompletes(),
            off.incompletes()
        ),
    );

    let mut cfg = base.clone();
    cfg.faults.ranking_noise = 0.3;
    let corrects: Vec<usize> = [1, 2, 4]
        .iter()
        .map(|&n| {
            cfg.search.n = n;
            run_suite(bw, &seeds, &cfg).corrects()
        })
        .collect();
    report.line(
        "branching trend",
        corrects[0] <= corrects[1] && corrects[1] <= corrects[2],
        format!("correct with n=1,2,4: {corrects:?}"),
    );

    let mut cfg = base.clone();
    cfg.search.max_states = 60;
    let beam = run_suite(bw, &seeds, &cfg);
    let wide = BenchConfig {
        search: ablation_config("no_beam", &cfg.search).unwrap(),
        ..cfg.clone()
    };
    let no_beam = run_suite(bw, &seeds, &wide);
    report.line(
        "beam trend",
        no_beam.avg_states() > beam.avg_states() && beam.corrects() >= no_beam.corrects(),
        format!(
            "avg states {:.2} vs {:.2} without beam, correct {} vs {}",
            beam.avg_states(),
            no_beam.avg_states(),
            beam.corrects(),
            no_beam.corrects()
        ),
    );

    // Traces of the faulty configurations join the oracle runs for the
    // budget check.
    let mut variants = Vec::new();
    let mut noisy = FaultModel::none(0);
    noisy.local_false_negative_rate = 0.25;
    noisy.ranking_noise = 0.3;
    for name in ["baseline", "no_backtrack", "no_beam", "branching_1"] {
        let mut c = ablation_config(name, &base.search).unwrap();
        c.max_states = 60;
        variants.push(c);
    }
    let extra: Vec<(SearchStats, SearchConfig)> = variants
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c.clone(), s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, seed)| {
            let problem = gen_instance(bw, &GenParams::small(bw, seed)).unwrap();
            let faults = FaultModel { seed, ..noisy };
            (traced(bw, &problem, &c, faults).1, c)
        })
        .collect();
    traces.extend(extra);
    let violations: Vec<String> = traces.iter().filter_map(|(s, c)| budget_violation(s, c)).collect();
    let empty = traces.iter().filter(|(s, _)| s.rounds.is_empty() && s.states_generated > 1).count();
    report.line(
        "beam and budget bounds",
        violations.is_empty() && empty == 0,
        format!("{} traces, {} violations {:?}", traces.len(), violations.len(), violations.first()),
    );

    // Golden renders.
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut mismatched = Vec::new();
    let mut checked = 0;
    for entry in std::fs::read_dir(&golden).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "schema") {
            continue;
        }
        checked += 1;
        let ok = DiagramSchema::parse(&std::fs::read_to_string(&path).unwrap())
            .ok()
            .and_then(|s| Some((render(&s).ok()?.svg, render(&s).ok()?.svg)))
            .is_some_and(|(a, b)| a == b && std::fs::read_to_string(path.with_extension("svg")).ok() == Some(a));
        if !ok {
            mismatched.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    report.line(
        "renderer determinism",
        checked > 0 && mismatched.is_empty(),
        format!("{checked} golden schemas, mismatched {mismatched:?}"),
    );

    // Natural-language round trip of ground actions.
    let nl: usize = DomainId::ALL
        .par_iter()
        .map(|&id| common::nl_round_trip_failures(id, 200, 5))
        .sum();
    report.line("NL round trip", nl == 0, format!("{nl} of 1200 actions changed"));

    // Local check false negatives on valid transitions.
    let problem = gen_instance(bw, &GenParams::small(bw, 3)).unwrap();
    let mut faults = FaultModel::none(99);
    faults.local_false_negative_rate = 0.25;
    let oracle = OracleProposer::new(bw, problem.clone(), faults);
    let task = Task::new(&bw.domain(), &problem);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut bits = task.init().clone();
    let mut failed = 0;
    for i in 0..1000 {
        let succ = task.successors(&bits);
        let (a, next) = succ[rng.random_range(0..succ.len())].clone();
        let parent = Bundle {
            state_text: oracle.state_text(&task.decode(&bits)),
            ..Bundle::default()
        };
        let child = Bundle {
            key: child_key(0x5eed, i),
            state_text: oracle.state_text(&task.decode(&next)),
            ..Bundle::default()
        };
        if !oracle.verify_local(&parent, &child, &oracle.action_text(task.action(a))).unwrap().pass {
            failed += 1;
        }
        bits = next;
    }
    let rate = failed as f64 / 1000.0;
    report.line(
        "fault calibration",
        (0.21..=0.29).contains(&rate),
        format!("{failed}/1000 valid transitions rejected"),
    );

    // Generated instances parse back, ground and are solvable nearby.
    let bad: Vec<String> = DomainId::ALL
        .par_iter()
        .flat_map(|&id| (0..50u64).into_par_iter().map(move |s| (id, s)))
        .filter_map(|(id, seed)| {
            let domain = id.domain();
            let Ok(p) = gen_instance(id, &GenParams::new(Size::smallest(id), seed)) else {
                return Some(format!("{id}#{seed}"));
            };
            let sound = parse_problem(&p.to_string(), &domain).is_ok_and(|q| q == p)
                && !ground_relevant(&domain, &p).is_empty()
                && bfs_distance(&domain, &p, 30).is_some_and(|d| d <= 30);
            (!sound).then(|| format!("{id}#{seed}"))
        })
        .collect();
    let generated = DomainId::ALL.len() * 50;
    report.line(
        "instance generator soundness",
        bad.is_empty(),
        format!("{} of {generated} instances unsound {bad:?}", bad.len()),
    );

    if report.failed > 0 {
        println!("{} criteria failed", report.failed);
        std::process::exit(1);
    }
}
