mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::{CliConfig, ConfigError};
use vplan_core::bench::{ablation_grid, format_table, plan_text, run_pipeline, run_suite, BenchConfig, RunOutcome};
use vplan_core::diagram::{render, DiagramSchema};
use vplan_core::nl::{self, PhraseTable};
use vplan_core::pddl::{parse_domain, parse_plan, parse_problem, validate_plan, DomainDef, ProblemDef};
use vplan_core::proposer::{ChatClient, ClientConfig, LiveProposer, OracleProposer, Proposer, TemplateSet};
use vplan_core::sim::{gen_instance, DomainId, GenParams};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INCORRECT: u8 = 3;
const EXIT_INCOMPLETE: u8 = 4;

/// Diagram-grounded planning with graph-of-thought search.
///
/// Exit codes: 0 success, 1 runtime error, 2 usage error, 3 incorrect plan
/// or invalid plan, 4 search incomplete.
#[derive(Parser)]
#[command(name = "vplan", version)]
struct Cli {
    /// Directory all relative paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Settings file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set search.k=2` or `--set max_states=60`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProposerKind {
    Oracle,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Domain,
    Instance,
    Plan,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Template,
    Prompt,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate seeded instances of a built-in domain.
    Gen {
        domain: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Translate a PDDL domain or instance to English, or English actions to a PDDL plan.
    Translate {
        kind: Kind,
        file: PathBuf,
        /// Domain file; defaults to the built-in domain named by the input.
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Problem file, needed for plans.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "template")]
        mode: Mode,
    },
    /// Search for a plan; writes a run directory.
    Plan {
        /// Instance as PDDL, or as English in the format `translate instance` emits.
        instance: PathBuf,
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, value_enum)]
        proposer: Option<ProposerKind>,
        /// Run directory; defaults to `runs/<problem name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a plan against a domain and problem.
    Validate {
        domain: PathBuf,
        problem: PathBuf,
        plan: PathBuf,
        /// Also list every state along the plan.
        #[arg(long)]
        trace: bool,
    },
    /// Render a diagram schema to SVG.
    Render {
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle pipeline over seeded instances and report outcomes.
    Bench {
        domain: String,
        /// Number of seeds (`20`), a range (`0..20`) or a list (`1,4,9`).
        #[arg(long, default_value = "20")]
        seeds: String,
        /// Run the baseline and every ablation variant.
        #[arg(long)]
        ablations: bool,
        /// Report directory; defaults to `bench/<domain>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn domain_id(name: &str) -> Result<DomainId> {
    name.parse::<DomainId>().map_err(|e| Usage(e.to_string()).into())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Name in the `(:domain x)` or `(domain x)` header of a PDDL text.
fn declared_domain(text: &str) -> Option<String> {
    let lower = text.to_ascii_lowercase();
    let at = lower.find("(:domain").map(|i| i + 8).or_else(|| lower.find("(domain").map(|i| i + 7))?;
    let name: String = lower[at..]
        .trim_start()
        .chars()
        .take_while(|c| !c.is_whitespace() && *c != ')')
        .collect();
    (!name.is_empty()).then_some(name)
}

/// The domain to use: an explicit file, or the built-in domain named in `text`.
fn load_domain(explicit: Option<&Path>, text: &str) -> Result<(DomainDef, Option<DomainId>)> {
    if let Some(p) = explicit {
        let d = parse_domain(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
        let id = DomainId::from_domain_name(&d.name);
        return Ok((d, id));
    }
    let name = declared_domain(text).ok_or_else(|| Usage("cannot tell the domain; pass --domain".into()))?;
    let id = domain_id(&name)?;
    Ok((id.domain(), Some(id)))
}

fn phrase_table(id: Option<DomainId>) -> Result<PhraseTable> {
    match id {
        Some(id) => Ok(PhraseTable::for_domain(id)),
        None => usage("template translation needs one of the built-in domains"),
    }
}

fn live_client(cfg: &CliConfig, transcripts: Option<PathBuf>) -> Result<(ChatClient, vplan_core::proposer::ProposerConfig)> {
    let pc = cfg.proposer()?;
    if pc.endpoint.is_empty() {
        return usage("live mode needs an endpoint: set VP_ENDPOINT or proposer.endpoint");
    }
    let mut cc = ClientConfig::from_proposer(&pc, cfg.get("proposer.api_key").map(String::from));
    cc.transcript_dir = transcripts;
    Ok((ChatClient::new(cc), pc))
}

fn cmd_gen(domain: &str, count: usize, seed: u64, out: &Path) -> Result<u8> {
    let id = domain_id(domain)?;
    if count == 0 {
        return usage("--count must be at least 1");
    }
    let ddir = out.join("domains").join(id.as_str());
    std::fs::create_dir_all(&ddir)?;
    std::fs::write(ddir.join("domain.pddl"), id.domain_source())?;
    let idir = out.join("instances").join(id.as_str());
    std::fs::create_dir_all(&idir)?;
    for s in seed..seed + count as u64 {
        let p = gen_instance(id, &GenParams::small(id, s))?;
        let path = idir.join(format!("instance-{s}.pddl"));
        std::fs::write(&path, p.to_string())?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_translate(
    cfg: &CliConfig,
    kind: Kind,
    file: &Path,
    domain: Option<&Path>,
    problem: Option<&Path>,
    mode: Mode,
) -> Result<u8> {
    let text = read(file)?;
    let client = match mode {
        Mode::Prompt => Some(live_client(cfg, None)?),
        Mode::Template => None,
    };
    let templates = || TemplateSet::load(&cfg.proposer().map(|p| p.templates).unwrap_or_default());
    let out = match kind {
        Kind::Domain => match &client {
            Some((c, _)) => nl::prompt::domain_to_nl(c, &templates()?, &text)?,
            None => {
                let d = parse_domain(&text).context("parsing domain")?;
                nl::domain_to_nl(&d, &phrase_table(DomainId::from_domain_name(&d.name))?)?
            }
        },
        Kind::Instance => match &client {
            Some((c, _)) => nl::prompt::instance_to_nl(c, &templates()?, &text)?,
            None => {
                let (d, id) = load_domain(domain, &text)?;
                let p = parse_problem(&text, &d).context("parsing problem")?;
                nl::instance_to_nl(&p, &phrase_table(id)?)?
            }
        },
        Kind::Plan => {
            let Some(pp) = problem else {
                return usage("translating a plan needs --problem");
            };
            let ptext = read(pp)?;
            let (d, id) = load_domain(domain, &ptext)?;
            let p = parse_problem(&ptext, &d).context("parsing problem")?;
            let actions: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            let plan = match &client {
                Some((c, _)) => nl::prompt::plan_to_pddl(c, &templates()?, &actions, &d, &p)?,
                None => nl::plan_to_pddl(&actions, &d, &p, &phrase_table(id)?)?,
            };
            plan_text(&plan)
        }
    };
    print!("{out}");
    if !out.ends_with('\n') {
        println!();
    }
    Ok(0)
}

fn load_instance(path: &Path, domain: &DomainDef, table: Option<&PhraseTable>) -> Result<ProblemDef> {
    let text = read(path)?;
    if text.trim_start().starts_with('(') || text.trim_start().starts_with(';') {
        return parse_problem(&text, domain).with_context(|| format!("parsing {}", path.display()));
    }
    let table = table.ok_or_else(|| Usage("English instances need a built-in domain".into()))?;
    Ok(nl::instance_from_nl(&text, domain, table)?)
}

fn cmd_plan(cfg: &CliConfig, instance: &Path, domain: Option<&Path>, kind: Option<ProposerKind>, out: Option<&Path>) -> Result<u8> {
    let head = read(instance)?;
    // English instances name their domain in the header, "(domain x)"
    let (d, id) = load_domain(domain, &head)?;
    let table = id.map(PhraseTable::for_domain);
    let problem = load_instance(instance, &d, table.as_ref())?;
    let kind = match kind {
        Some(k) => k,
        None => match cfg.get("proposer.kind") {
            None | Some("oracle") => ProposerKind::Oracle,
            Some("live") => ProposerKind::Live,
            Some(other) => return usage(format!("unknown proposer `{other}`, expected oracle or live")),
        },
    };
    let search = cfg.search(id)?;
    let run_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("runs").join(&problem.name));
    let Some(table) = table else {
        return usage("planning needs one of the built-in domains");
    };
    let id = id.unwrap();
    let run = match kind {
        ProposerKind::Oracle => {
            let proposer = OracleProposer::new(id, problem.clone(), cfg.faults()?);
            let translate = |t: &[String]| nl::plan_to_pddl(t, &d, &problem, &table);
            run_pipeline(&d, &problem, &table, &proposer, &search, Some(&run_dir), &translate)?
        }
        ProposerKind::Live => {
            let transcripts = cfg.get("proposer.transcripts").map(|_| run_dir.join("transcripts"));
            let (client, pc) = live_client(cfg, transcripts.clone())?;
            pc.check(search.n).map_err(ConfigError)?;
            let templates = TemplateSet::load(&pc.templates)?;
            let (tclient, _) = live_client(cfg, transcripts)?;
            let domain_text = nl::domain_to_nl(&d, &table)?;
            let instance_text = nl::instance_to_nl(&problem, &table)?;
            let proposer = LiveProposer::new(client, templates.clone(), pc, domain_text, instance_text);
            let translate = |t: &[String]| nl::prompt::plan_to_pddl(&tclient, &templates, t, &d, &problem);
            run_pipeline(&d, &problem, &table, &proposer as &dyn Proposer, &search, Some(&run_dir), &translate)?
        }
    };
    if let Some(plan) = &run.plan {
        print!("{}", plan_text(plan));
    }
    let s = &run.result.stats;
    eprintln!(
        "{}: {} states, {} backtracks, run directory {}",
        run.outcome,
        s.states_generated,
        s.backtracks,
        run_dir.display()
    );
    if let Some(e) = &run.translation_error {
        eprintln!("plan translation failed: {e}");
    }
    if let Some(r) = &run.validation {
        if !r.is_valid() {
            eprint!("{}", r.to_text(false));
        }
    }
    Ok(match run.outcome {
        RunOutcome::Correct => 0,
        RunOutcome::Incorrect => EXIT_INCORRECT,
        RunOutcome::Incomplete => EXIT_INCOMPLETE,
    })
}

fn cmd_validate(domain: &Path, problem: &Path, plan: &Path, trace: bool) -> Result<u8> {
    let d = parse_domain(&read(domain)?).with_context(|| format!("parsing {}", domain.display()))?;
    let p = parse_problem(&read(problem)?, &d).with_context(|| format!("parsing {}", problem.display()))?;
    let plan = parse_plan(&read(plan)?).with_context(|| format!("parsing {}", plan.display()))?;
    let report = validate_plan(&d, &p, &plan);
    print!("{}", report.to_text(trace));
    Ok(if report.is_valid() { 0 } else { EXIT_INCORRECT })
}

fn cmd_render(schema: &Path, out: &Path) -> Result<u8> {
    let s = DiagramSchema::parse(&read(schema)?)?;
    let r = render(&s)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, r.svg)?;
    println!("{}", out.display());
    Ok(0)
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Usage(format!("invalid --seeds `{spec}`"));
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad().into());
        }
        return Ok((a..b).collect());
    }
    if spec.contains(',') {
        return spec
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad().into()))
            .collect();
    }
    let n: u64 = spec.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad().into());
    }
    Ok((0..n).collect())
}

fn cmd_bench(cfg: &CliConfig, domain: &str, seeds: &str, ablations: bool, out: Option<&Path>) -> Result<u8> {
    let id = domain_id(domain)?;
    let seeds = parse_seeds(seeds)?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("bench").join(id.as_str()));
    let base = BenchConfig {
        search: cfg.search(Some(id))?,
        faults: cfg.faults()?,
        size: None,
        workers: cfg.bench_workers()?,
        out_dir: Some(out.clone()),
    };
    let rows = if ablations {
        ablation_grid(id, &seeds, &base)
    } else {
        let cfg = BenchConfig {
            out_dir: Some(out.join("baseline")),
            ..base
        };
        vec![("baseline".to_string(), run_suite(id, &seeds, &cfg))]
    };
    for (name, r) in &rows {
        std::fs::write(out.join(name).join("records.csv"), r.to_csv())?;
    }
    let table = format_table(&rows);
    std::fs::write(out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    std::env::set_current_dir(&cli.workdir)
        .map_err(|e| Usage(format!("--workdir {}: {e}", cli.workdir.display())))?;
    let mut cfg = CliConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(&read(path).map_err(|e| Usage(e.to_string()))?)?;
    }
    cfg.load_env(|v| std::env::var(v).ok());
    cfg.load_flags(&cli.set)?;
    match cli.cmd {
        Cmd::Gen { domain, count, seed, out } => cmd_gen(&domain, count, seed, &out),
        Cmd::Translate {
            kind,
            file,
            domain,
            problem,
            mode,
        } => cmd_translate(&cfg, kind, &file, domain.as_deref(), problem.as_deref(), mode),
        Cmd::Plan {
            instance,
            domain,
            proposer,
            out,
        } => cmd_plan(&cfg, &instance, domain.as_deref(), proposer, out.as_deref()),
        Cmd::Validate {
            domain,
            problem,
            plan,
            trace,
        } => cmd_validate(&domain, &problem, &plan, trace),
        Cmd::Render { schema, out } => cmd_render(&schema, &out),
        Cmd::Bench {
            domain,
            seeds,
            ablations,
            out,
        } => cmd_bench(&cfg, &domain, &seeds, ablations, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<Usage>().is_some() || e.downcast_ref::<ConfigError>().is_some();
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_RUNTIME })
        }
    }
}
