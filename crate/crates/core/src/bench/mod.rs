//! Batch runs: generate instances, search, validate the back-translated
//! plans and aggregate the outcomes into tables.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::nl::{domain_to_nl, NlError, PhraseTable};
use crate::pddl::{validate_plan, DomainDef, Plan, ProblemDef, ValidationReport};
use crate::proposer::{CallKind, OracleProposer, Proposer};
use crate::search::{
    base_style, bootstrap_domain_diagram, init_endpoints, run_search, write_run_dir, Endpoints, Instance, Outcome,
    SearchConfig, SearchError, SearchResult,
};
use crate::sim::{gen_instance, splitmix, DomainId, FaultModel, GenParams, Size};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunOutcome {
    Correct,
    Incorrect,
    Incomplete,
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunOutcome::Correct => "correct",
            RunOutcome::Incorrect => "incorrect",
            RunOutcome::Incomplete => "incomplete",
        })
    }
}

impl FromStr for RunOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "correct" => Ok(RunOutcome::Correct),
            "incorrect" => Ok(RunOutcome::Incorrect),
            "incomplete" => Ok(RunOutcome::Incomplete),
            _ => Err(format!("unknown outcome `{s}`")),
        }
    }
}

/// One instance run. Equality ignores wall time.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub domain: DomainId,
    pub seed: u64,
    pub outcome: RunOutcome,
    /// Plan length when solved, otherwise 0.
    pub depth: usize,
    pub states: usize,
    pub backtracks: usize,
    pub wall_ms: u64,
    pub calls: Vec<(CallKind, u64)>,
    /// Set when the run stopped on an error rather than a budget.
    pub error: Option<String>,
}

impl PartialEq for RunRecord {
    fn eq(&self, o: &Self) -> bool {
        self.domain == o.domain
            && self.seed == o.seed
            && self.outcome == o.outcome
            && self.depth == o.depth
            && self.states == o.states
            && self.backtracks == o.backtracks
            && self.calls == o.calls
            && self.error == o.error
    }
}

pub const CSV_HEADER: &str = "domain,seed,outcome,depth,states,backtracks,wall_ms";

impl RunRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.domain, self.seed, self.outcome, self.depth, self.states, self.backtracks, self.wall_ms
        )
    }

    fn to_file_text(&self) -> String {
        let mut s = self.csv_line();
        s.push('\n');
        for (k, n) in &self.calls {
            let _ = writeln!(s, "{} {n}", k.as_str());
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error {e}");
        }
        s
    }

    fn from_file_text(text: &str) -> Option<RunRecord> {
        let mut lines = text.lines();
        let f: Vec<&str> = lines.next()?.split(',').collect();
        if f.len() != 7 {
            return None;
        }
        let mut rec = RunRecord {
            domain: f[0].parse().ok()?,
            seed: f[1].parse().ok()?,
            outcome: f[2].parse().ok()?,
            depth: f[3].parse().ok()?,
            states: f[4].parse().ok()?,
            backtracks: f[5].parse().ok()?,
            wall_ms: f[6].parse().ok()?,
            calls: Vec::new(),
            error: None,
        };
        for l in lines {
            if let Some(e) = l.strip_prefix("error ") {
                rec.error = Some(e.to_string());
                continue;
            }
            let (k, n) = l.split_once(' ')?;
            let kind = CallKind::ALL.into_iter().find(|c| c.as_str() == k)?;
            rec.calls.push((kind, n.parse().ok()?));
        }
        Some(rec)
    }
}

/// The output of one complete pipeline run on an instance.
pub struct PipelineRun {
    pub endpoints: Endpoints,
    pub result: SearchResult,
    pub plan: Option<Plan>,
    pub validation: Option<ValidationReport>,
    pub outcome: RunOutcome,
    /// Why a solved plan could not be translated back.
    pub translation_error: Option<NlError>,
}

pub fn plan_text(plan: &Plan) -> String {
    plan.steps.iter().map(|s| format!("{s}\n")).collect()
}

/// Bootstrap the style, draw the endpoints, search, translate the plan and
/// validate it. Writes the run directory (with `plan.pddl` when a plan was
/// translated) when `run_dir` is given.
pub fn run_pipeline(
    domain: &DomainDef,
    problem: &ProblemDef,
    table: &PhraseTable,
    proposer: &dyn Proposer,
    cfg: &SearchConfig,
    run_dir: Option<&Path>,
    translate: &dyn Fn(&[String]) -> Result<Plan, NlError>,
) -> Result<PipelineRun, SearchError> {
    let inst = Instance { domain, problem, table };
    let base = base_style(domain);
    let style = if cfg.no_diagram {
        base
    } else {
        let domain_text = domain_to_nl(domain, table)?;
        let cache = run_dir.map(|d| d.join("style.txt"));
        bootstrap_domain_diagram(&domain_text, problem, &base, proposer, 3, cache.as_deref())?
    };
    let endpoints = init_endpoints(&inst, &style, proposer, cfg)?;
    let result = run_search(&endpoints, &inst, cfg, proposer, &style)?;
    let mut run = PipelineRun {
        endpoints,
        result,
        plan: None,
        validation: None,
        outcome: RunOutcome::Incomplete,
        translation_error: None,
    };
    if run.result.outcome == Outcome::Solved {
        run.outcome = RunOutcome::Incorrect;
        match translate(&run.result.plan) {
            Ok(plan) => {
                let report = validate_plan(domain, problem, &plan);
                if report.is_valid() {
                    run.outcome = RunOutcome::Correct;
                }
                run.plan = Some(plan);
                run.validation = Some(report);
            }
            Err(e) => run.translation_error = Some(e),
        }
    }
    if let Some(dir) = run_dir {
        write_run_dir(dir, &run.endpoints, &run.result)?;
        if let Some(plan) = &run.plan {
            std::fs::write(dir.join("plan.pddl"), plan_text(plan))?;
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub search: SearchConfig,
    /// Fault model; its seed is mixed with each instance seed.
    pub faults: FaultModel,
    /// Instance size; `None` draws the small sizes from the seed.
    pub size: Option<Size>,
    /// Instances run in parallel.
    pub workers: usize,
    /// Root for run directories; runs with a finished record are skipped.
    pub out_dir: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(id: DomainId) -> Self {
        BenchConfig {
            search: SearchConfig::for_domain(id),
            faults: FaultModel::default(),
            size: None,
            workers: 1,
            out_dir: None,
        }
    }
}

fn gen_params(id: DomainId, seed: u64, size: Option<Size>) -> GenParams {
    match size {
        Some(s) => GenParams::new(s, seed),
        None => GenParams::small(id, seed),
    }
}

/// Run the oracle pipeline on one generated instance.
pub fn run_instance(id: DomainId, seed: u64, cfg: &BenchConfig, run_dir: Option<&Path>) -> RunRecord {
    let start = Instant::now();
    let mut rec = RunRecord {
        domain: id,
        seed,
        outcome: RunOutcome::Incomplete,
        depth: 0,
        states: 0,
        backtracks: 0,
        wall_ms: 0,
        calls: Vec::new(),
        error: None,
    };
    let problem = match gen_instance(id, &gen_params(id, seed, cfg.size)) {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let domain = id.domain();
    let table = PhraseTable::for_domain(id);
    let faults = FaultModel {
        seed: splitmix(cfg.faults.seed ^ seed),
        ..cfg.faults
    };
    let proposer = OracleProposer::new(id, problem.clone(), faults);
    let translate = |texts: &[String]| crate::nl::plan_to_pddl(texts, &domain, &problem, &table);
    match run_pipeline(&domain, &problem, &table, &proposer, &cfg.search, run_dir, &translate) {
        Ok(run) => {
            rec.outcome = run.outcome;
            if run.result.outcome == Outcome::Solved {
                rec.depth = run.result.plan.len();
            }
            rec.states = run.result.stats.states_generated;
            rec.backtracks = run.result.stats.backtracks;
            rec.calls = run.result.stats.calls;
        }
        Err(e) => {
            rec.error = Some(e.to_string());
            rec.calls = proposer.counters().snapshot();
        }
    }
    rec.wall_ms = start.elapsed().as_millis() as u64;
    rec
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub domain: DomainId,
    pub records: Vec<RunRecord>,
}

impl SuiteReport {
    fn count(&self, o: RunOutcome) -> usize {
        self.records.iter().filter(|r| r.outcome == o).count()
    }

    pub fn corrects(&self) -> usize {
        self.count(RunOutcome::Correct)
    }

    pub fn incorrects(&self) -> usize {
        self.count(RunOutcome::Incorrect)
    }

    pub fn incompletes(&self) -> usize {
        self.count(RunOutcome::Incomplete)
    }

    fn pct(&self, n: usize) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            100.0 * n as f64 / self.records.len() as f64
        }
    }

    pub fn correct_pct(&self) -> f64 {
        self.pct(self.corrects())
    }

    pub fn incorrect_pct(&self) -> f64 {
        self.pct(self.incorrects())
    }

    pub fn incomplete_pct(&self) -> f64 {
        self.pct(self.incompletes())
    }

    /// (avg, max, min) plan length over correct runs.
    pub fn depth_stats(&self) -> Option<(f64, usize, usize)> {
        let d: Vec<usize> = self
            .records
            .iter()
            .filter(|r| r.outcome == RunOutcome::Correct)
            .map(|r| r.depth)
            .collect();
        if d.is_empty() {
            return None;
        }
        let avg = d.iter().sum::<usize>() as f64 / d.len() as f64;
        Some((avg, *d.iter().max().unwrap(), *d.iter().min().unwrap()))
    }

    /// Average states generated over all runs, incompletes included.
    pub fn avg_states(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.states).sum::<usize>() as f64 / self.records.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.records {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }
}

/// Run the oracle pipeline on every seed. Per-instance errors become
/// incomplete records.
pub fn run_suite(id: DomainId, seeds: &[u64], cfg: &BenchConfig) -> SuiteReport {
    let one = |seed: &u64| {
        let Some(root) = &cfg.out_dir else {
            return run_instance(id, *seed, cfg, None);
        };
        let dir = root.join(format!("seed_{seed}"));
        let record_path = dir.join("record.txt");
        if let Some(rec) = std::fs::read_to_string(&record_path)
            .ok()
            .and_then(|t| RunRecord::from_file_text(&t))
        {
            return rec;
        }
        // A partial directory from an interrupted run is redone from scratch.
        let _ = std::fs::remove_dir_all(&dir);
        let rec = run_instance(id, *seed, cfg, Some(&dir));
        let _ = std::fs::create_dir_all(&dir);
        let _ = std::fs::write(&record_path, rec.to_file_text());
        rec
    };
    let records = if cfg.workers > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
            Ok(pool) => pool.install(|| seeds.par_iter().map(one).collect()),
            Err(_) => seeds.iter().map(one).collect(),
        }
    } else {
        seeds.iter().map(one).collect()
    };
    SuiteReport { domain: id, records }
}

/// Variant names of the ablation grid, baseline first.
pub const ABLATIONS: [&str; 8] = [
    "baseline",
    "no_diagram",
    "no_schema",
    "code_as_context",
    "branching_1",
    "branching_2",
    "no_backtrack",
    "no_beam",
];

/// Apply a named variant to a search configuration.
pub fn ablation_config(name: &str, base: &SearchConfig) -> Option<SearchConfig> {
    let mut c = base.clone();
    match name {
        "baseline" => {}
        "no_diagram" => c.no_diagram = true,
        "no_schema" => c.no_schema = true,
        "code_as_context" => c.code_as_context = true,
        "branching_1" => c.n = 1,
        "branching_2" => c.n = 2,
        "no_backtrack" => c.no_backtrack = true,
        "no_beam" => c.no_beam = true,
        _ => return None,
    }
    Some(c)
}

/// Run the baseline and every variant on the same seeds.
pub fn ablation_grid(id: DomainId, seeds: &[u64], base: &BenchConfig) -> Vec<(String, SuiteReport)> {
    ABLATIONS
        .iter()
        .map(|name| {
            let cfg = BenchConfig {
                search: ablation_config(name, &base.search).unwrap(),
                out_dir: base.out_dir.as_ref().map(|d| d.join(name)),
                ..base.clone()
            };
            (name.to_string(), run_suite(id, seeds, &cfg))
        })
        .collect()
}

/// Aligned plain-text table, one row per named report.
pub fn format_table(rows: &[(String, SuiteReport)]) -> String {
    let header = [
        "config",
        "domain",
        "runs",
        "correct%",
        "incorrect%",
        "incomplete%",
        "avg_depth",
        "max_depth",
        "min_depth",
        "avg_states",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (name, r) in rows {
        let (avg, max, min) = match r.depth_stats() {
            Some((a, x, n)) => (format!("{a:.2}"), x.to_string(), n.to_string()),
            None => ("-".into(), "-".into(), "-".into()),
        };
        cells.push(vec![
            name.clone(),
            r.domain.to_string(),
            r.records.len().to_string(),
            format!("{:.1}", r.correct_pct()),
            format!("{:.1}", r.incorrect_pct()),
            format!("{:.1}", r.incomplete_pct()),
            avg,
            max,
            min,
            format!("{:.2}", r.avg_states()),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < 2 {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(outcome: RunOutcome, depth: usize, states: usize) -> RunRecord {
        RunRecord {
            domain: DomainId::Blocksworld,
            seed: 0,
            outcome,
            depth,
            states,
            backtracks: 0,
            wall_ms: 5,
            calls: vec![(CallKind::CheckGoal, 3)],
            error: None,
        }
    }

    #[test]
    fn aggregates_follow_the_outcomes() {
        let r = SuiteReport {
            domain: DomainId::Blocksworld,
            records: vec![
                record(RunOutcome::Correct, 4, 10),
                record(RunOutcome::Correct, 2, 20),
                record(RunOutcome::Incorrect, 3, 30),
                record(RunOutcome::Incomplete, 0, 120),
            ],
        };
        assert_eq!(r.correct_pct(), 50.0);
        assert_eq!(r.incorrect_pct() + r.incomplete_pct(), 50.0);
        assert_eq!(r.depth_stats(), Some((3.0, 4, 2)));
        assert_eq!(r.avg_states(), 45.0);
        let table = format_table(&[("baseline".into(), r)]);
        assert_eq!(table.lines().count(), 2);
        assert!(table.lines().nth(1).unwrap().starts_with("baseline"));
    }

    #[test]
    fn records_survive_the_run_directory() {
        let mut r = record(RunOutcome::Incorrect, 3, 7);
        r.error = Some("x failed".into());
        assert_eq!(RunRecord::from_file_text(&r.to_file_text()), Some(r));
    }

    #[test]
    fn equality_ignores_wall_time() {
        let a = record(RunOutcome::Correct, 1, 1);
        let mut b = a.clone();
        b.wall_ms = 999;
        assert_eq!(a, b);
    }
}
