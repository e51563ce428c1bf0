use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Endpoints, SearchNode, SearchResult};

fn write_node(dir: &Path, node: &SearchNode) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("state.txt"), &node.bundle.state_text)?;
    if let Some(s) = &node.bundle.schema {
        fs::write(dir.join("schema.txt"), s)?;
    }
    if let Some(svg) = &node.svg {
        fs::write(dir.join("diagram.svg"), svg)?;
    }
    let mut info = String::new();
    let _ = writeln!(info, "id: {}", node.id);
    let _ = writeln!(info, "depth: {}", node.depth);
    match node.parent {
        Some(p) => {
            let _ = writeln!(info, "parent: {p}");
        }
        None => info.push_str("parent: none\n"),
    }
    let _ = writeln!(info, "action: {}", node.action.as_deref().unwrap_or("none"));
    let _ = writeln!(info, "sample: {}", node.sample_index);
    let _ = writeln!(info, "status: {}", node.status);
    for v in &node.verdicts {
        let _ = writeln!(info, "{v}");
    }
    fs::write(dir.join("info.txt"), info)?;
    if !node.attempts.is_empty() {
        let att = dir.join("attempts");
        fs::create_dir_all(&att)?;
        for (i, (schema, critique)) in node.attempts.iter().enumerate() {
            if let Some(s) = schema {
                fs::write(att.join(format!("{i}.schema.txt")), s)?;
            }
            fs::write(att.join(format!("{i}.critique.txt")), critique)?;
        }
    }
    Ok(())
}

/// Lay out one search on disk: a directory per state, rankings per depth,
/// the goal descriptor and a summary. `plan.pddl` is left to the caller,
/// which knows how to translate the plan.
pub fn write_run_dir(dir: &Path, endpoints: &Endpoints, result: &SearchResult) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for node in &result.nodes {
        write_node(&dir.join(format!("state_{}", node.id)), node)?;
    }
    let goal = dir.join("goal_state");
    fs::create_dir_all(&goal)?;
    fs::write(goal.join("state.txt"), &endpoints.goal.state_text)?;
    if let Some(s) = &endpoints.goal.schema {
        fs::write(goal.join("schema.txt"), s)?;
    }
    if let Some(svg) = &endpoints.goal_svg {
        fs::write(goal.join("diagram.svg"), svg)?;
    }
    let ranking = dir.join("ranking");
    fs::create_dir_all(&ranking)?;
    let mut per_depth: std::collections::BTreeMap<usize, String> = Default::default();
    for (d, ids) in &result.rankings {
        let line = ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        let e = per_depth.entry(*d).or_default();
        e.push_str(&line);
        e.push('\n');
    }
    for (d, text) in per_depth {
        fs::write(ranking.join(format!("depth_{d}.txt")), text)?;
    }
    let plan: String = result.plan.iter().map(|a| format!("{a}\n")).collect();
    fs::write(dir.join("plan.nl.txt"), plan)?;
    let s = &result.stats;
    let mut summary = String::new();
    let _ = writeln!(summary, "outcome: {}", result.outcome);
    let _ = writeln!(summary, "plan_length: {}", result.plan.len());
    let _ = writeln!(summary, "states: {}", s.states_generated);
    let _ = writeln!(summary, "max_depth: {}", s.max_depth_reached);
    let _ = writeln!(summary, "backtracks: {}", s.backtracks);
    let _ = writeln!(summary, "rounds: {}", s.rounds.len());
    for (k, n) in &s.calls {
        let _ = writeln!(summary, "calls.{}: {n}", k.as_str());
    }
    fs::write(dir.join("result.txt"), summary)
}
