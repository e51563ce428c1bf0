use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::ProposerError;

/// Template names and the placeholders the code supplies for each.
pub const CATALOG: [(&str, &[&str]); 13] = [
    ("propose_action", &["domain", "instance", "state", "path", "goal"]),
    ("domain_diagram", &["domain", "instance", "format"]),
    ("schema", &["state", "action", "style", "format"]),
    ("code", &["schema"]),
    ("reflect", &["state", "schema", "action"]),
    ("local_check", &["domain", "parent_state", "child_state", "action"]),
    ("global_check", &["domain", "instance", "path", "state", "goal"]),
    ("goal_check", &["state", "goal"]),
    ("rank_states", &["goal", "candidates"]),
    ("rank_diagrams", &["candidates"]),
    ("nl_domain", &["exemplars", "domain_pddl"]),
    ("nl_instance", &["exemplar", "instance_pddl"]),
    ("nl_plan", &["exemplar", "domain_pddl", "instance_pddl", "plan"]),
];

const BUILTIN: [(&str, &str); 13] = [
    ("propose_action", include_str!("../../templates/propose_action.txt")),
    ("domain_diagram", include_str!("../../templates/domain_diagram.txt")),
    ("schema", include_str!("../../templates/schema.txt")),
    ("code", include_str!("../../templates/code.txt")),
    ("reflect", include_str!("../../templates/reflect.txt")),
    ("local_check", include_str!("../../templates/local_check.txt")),
    ("global_check", include_str!("../../templates/global_check.txt")),
    ("goal_check", include_str!("../../templates/goal_check.txt")),
    ("rank_states", include_str!("../../templates/rank_states.txt")),
    ("rank_diagrams", include_str!("../../templates/rank_diagrams.txt")),
    ("nl_domain", include_str!("../../templates/nl_domain.txt")),
    ("nl_instance", include_str!("../../templates/nl_instance.txt")),
    ("nl_plan", include_str!("../../templates/nl_plan.txt")),
];

/// A prompt template: a `name`/`version`/`requires` header, a `---` line
/// and a body with `{{placeholder}}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub version: u32,
    pub requires: BTreeSet<String>,
    body: String,
}

fn placeholders(body: &str) -> Result<BTreeSet<String>, String> {
    let mut out = BTreeSet::new();
    let mut rest = body;
    while let Some(i) = rest.find("{{") {
        let after = &rest[i + 2..];
        let j = after.find("}}").ok_or("unclosed `{{`")?;
        let name = after[..j].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad placeholder `{{{{{}}}}}`", &after[..j]));
        }
        out.insert(name.to_string());
        rest = &after[j + 2..];
    }
    Ok(out)
}

impl Template {
    pub fn parse(text: &str) -> Result<Template, String> {
        let (head, body) = text
            .split_once("\n---\n")
            .ok_or("missing `---` separator after the header")?;
        let mut name = None;
        let mut version = None;
        let mut requires = BTreeSet::new();
        for line in head.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once(':').ok_or_else(|| format!("bad header line `{line}`"))?;
            match k.trim() {
                "name" => name = Some(v.trim().to_string()),
                "version" => version = Some(v.trim().parse().map_err(|_| format!("bad version `{}`", v.trim()))?),
                "requires" => {
                    requires = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                other => return Err(format!("unknown header key `{other}`")),
            }
        }
        let name: String = name.ok_or("missing `name`")?;
        let used = placeholders(body)?;
        if let Some(m) = requires.difference(&used).next() {
            return Err(format!("template `{name}` declares `{m}` but never uses it"));
        }
        if let Some(m) = used.difference(&requires).next() {
            return Err(format!("template `{name}` uses undeclared placeholder `{m}`"));
        }
        Ok(Template {
            name,
            version: version.ok_or("missing `version`")?,
            requires,
            body: body.to_string(),
        })
    }

    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, ProposerError> {
        let mut out = self.body.clone();
        for r in &self.requires {
            let v = values
                .iter()
                .find(|(k, _)| k == r)
                .ok_or_else(|| ProposerError::Template(format!("`{}` needs a value for `{r}`", self.name)))?;
            out = out.replace(&format!("{{{{{r}}}}}"), v.1);
        }
        Ok(out)
    }
}

/// The full set of templates, checked against what the code supplies.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub id: String,
    templates: BTreeMap<String, Template>,
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        TemplateSet::from_sources("builtin", BUILTIN.iter().map(|(n, t)| (n.to_string(), t.to_string())))
            .expect("built-in templates are consistent")
    }

    /// `builtin`, or a directory containing `<name>.txt` for every template.
    pub fn load(id: &str) -> Result<TemplateSet, ProposerError> {
        if id == "builtin" {
            return Ok(TemplateSet::builtin());
        }
        let dir = Path::new(id);
        let mut sources = Vec::new();
        for (name, _) in CATALOG {
            let path = dir.join(format!("{name}.txt"));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ProposerError::Template(format!("{}: {e}", path.display())))?;
            sources.push((name.to_string(), text));
        }
        TemplateSet::from_sources(id, sources)
    }

    fn from_sources(id: &str, sources: impl IntoIterator<Item = (String, String)>) -> Result<TemplateSet, ProposerError> {
        let mut templates = BTreeMap::new();
        for (file, text) in sources {
            let t = Template::parse(&text).map_err(|e| ProposerError::Template(format!("{file}: {e}")))?;
            if t.name != file {
                return Err(ProposerError::Template(format!("{file}: header names `{}`", t.name)));
            }
            let supplied: BTreeSet<&str> = CATALOG
                .iter()
                .find(|(n, _)| *n == t.name)
                .map(|(_, p)| p.iter().copied().collect())
                .ok_or_else(|| ProposerError::Template(format!("unknown template `{}`", t.name)))?;
            if let Some(m) = t.requires.iter().find(|r| !supplied.contains(r.as_str())) {
                return Err(ProposerError::Template(format!("`{}` requires `{m}`, which is never supplied", t.name)));
            }
            templates.insert(t.name.clone(), t);
        }
        if let Some((n, _)) = CATALOG.iter().find(|(n, _)| !templates.contains_key(*n)) {
            return Err(ProposerError::Template(format!("missing template `{n}`")));
        }
        Ok(TemplateSet {
            id: id.to_string(),
            templates,
        })
    }

    pub fn get(&self, name: &str) -> &Template {
        &self.templates[name]
    }

    pub fn render(&self, name: &str, values: &[(&str, &str)]) -> Result<String, ProposerError> {
        self.get(name).render(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_loads() {
        let set = TemplateSet::builtin();
        let t = set.get("goal_check");
        assert_eq!(t.version, 1);
        let out = t.render(&[("state", "S"), ("goal", "G")]).unwrap();
        assert!(out.contains("S") && out.contains("G") && !out.contains("{{"));
        assert!(t.render(&[("state", "S")]).is_err());
    }

    #[test]
    fn header_and_placeholders_must_agree() {
        assert!(Template::parse("name: x\nversion: 1\nrequires: a\n---\nno slot").is_err());
        assert!(Template::parse("name: x\nversion: 1\nrequires:\n---\n{{a}}").is_err());
        assert!(Template::parse("name: x\nversion: 1\nrequires: a\n---\nuse {{a}}").is_ok());
        assert!(Template::parse("no header").is_err());
    }

    #[test]
    fn directory_sets_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        for (n, t) in BUILTIN {
            std::fs::write(dir.path().join(format!("{n}.txt")), t).unwrap();
        }
        let id = dir.path().to_str().unwrap();
        assert!(TemplateSet::load(id).is_ok());
        std::fs::write(
            dir.path().join("goal_check.txt"),
            "name: goal_check\nversion: 2\nrequires: state, goal, mood\n---\n{{state}} {{goal}} {{mood}}",
        )
        .unwrap();
        assert!(TemplateSet::load(id).is_err());
        std::fs::remove_file(dir.path().join("code.txt")).unwrap();
        assert!(TemplateSet::load(id).is_err());
    }
}
