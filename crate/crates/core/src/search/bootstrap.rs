use std::path::Path;

use super::SearchError;
use crate::diagram::{check_schema, DiagramSchema, StyleMap};
use crate::pddl::ProblemDef;
use crate::proposer::Proposer;

fn checked(texts: Vec<String>, objects: &[String]) -> Vec<DiagramSchema> {
    texts
        .iter()
        .filter_map(|t| DiagramSchema::parse(t).ok())
        .filter(|s| check_schema(s, objects).is_empty())
        .collect()
}

/// Pick a reference diagram for the domain and derive the style map used
/// for every later schema. A cached map at `cache` is reused as is; a fresh
/// one is written there.
pub fn bootstrap_domain_diagram(
    domain_text: &str,
    problem: &ProblemDef,
    base: &StyleMap,
    proposer: &dyn Proposer,
    candidates: usize,
    cache: Option<&Path>,
) -> Result<StyleMap, SearchError> {
    if let Some(path) = cache.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path).map_err(|e| SearchError::Cache {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        return StyleMap::parse(&text).map_err(|e| SearchError::Cache {
            path: path.display().to_string(),
            msg: e.to_string(),
        });
    }
    let objects: Vec<String> = problem.objects.keys().cloned().collect();
    let mut valid = checked(proposer.propose_domain_schemas(domain_text, candidates)?, &objects);
    if valid.is_empty() {
        valid = checked(proposer.propose_domain_schemas(domain_text, candidates)?, &objects);
    }
    if valid.is_empty() {
        return Err(SearchError::AllCandidatesInvalid);
    }
    let order = proposer.rank_schemas(&valid, &objects)?;
    let best = order.first().copied().filter(|&i| i < valid.len()).unwrap_or(0);
    let style = StyleMap::from_schema(&valid[best], problem, base);
    if let Some(path) = cache {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, style.to_text())?;
    }
    Ok(style)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposer::{
        ActionProposal, Bundle, CallCounters, CallKind, OracleProposer, ProposerError, Verdict,
    };
    use crate::sim::{gen_instance, DomainId, FaultModel, GenParams};

    #[test]
    fn parking_style_is_cached_and_reused() {
        let id = DomainId::Parking;
        let problem = gen_instance(id, &GenParams::small(id, 2)).unwrap();
        let proposer = OracleProposer::new(id, problem.clone(), FaultModel::none(0));
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("style.txt");
        let base = StyleMap::default_for(id);
        let style = bootstrap_domain_diagram("rules", &problem, &base, &proposer, 3, Some(&cache)).unwrap();
        assert!(style.types.contains_key("car") && style.types.contains_key("curb"));
        assert!(cache.exists());
        let calls = proposer.counters().get(CallKind::DomainSchemas);
        let again = bootstrap_domain_diagram("rules", &problem, &base, &proposer, 3, Some(&cache)).unwrap();
        assert_eq!(again, style);
        assert_eq!(proposer.counters().get(CallKind::DomainSchemas), calls);
    }

    struct Garbage(CallCounters);

    impl Proposer for Garbage {
        fn propose_domain_schemas(&self, _: &str, count: usize) -> Result<Vec<String>, ProposerError> {
            self.0.bump(CallKind::DomainSchemas);
            Ok(vec!["not a schema".into(); count])
        }
        fn rank_schemas(&self, _: &[DiagramSchema], _: &[String]) -> Result<Vec<usize>, ProposerError> {
            unreachable!()
        }
        fn propose_action(&self, _: &Bundle, _: &Bundle, _: usize) -> Result<ActionProposal, ProposerError> {
            unreachable!()
        }
        fn make_schema(&self, _: u64, _: &str, _: Option<&str>, _: &StyleMap) -> Result<String, ProposerError> {
            unreachable!()
        }
        fn reflect_schema(
            &self,
            _: u64,
            _: usize,
            _: &DiagramSchema,
            _: &str,
            _: Option<&str>,
            _: &StyleMap,
        ) -> Result<Verdict, ProposerError> {
            unreachable!()
        }
        fn verify_local(&self, _: &Bundle, _: &Bundle, _: &str) -> Result<Verdict, ProposerError> {
            unreachable!()
        }
        fn verify_global(&self, _: &Bundle, _: &Bundle, _: &Bundle) -> Result<Verdict, ProposerError> {
            unreachable!()
        }
        fn check_goal(&self, _: &Bundle, _: &Bundle) -> Result<bool, ProposerError> {
            unreachable!()
        }
        fn rank_states(&self, _: &[&Bundle], _: &Bundle) -> Result<Vec<usize>, ProposerError> {
            unreachable!()
        }
        fn counters(&self) -> &CallCounters {
            &self.0
        }
    }

    #[test]
    fn unparseable_candidates_twice_fail() {
        let id = DomainId::Parking;
        let problem = gen_instance(id, &GenParams::small(id, 2)).unwrap();
        let p = Garbage(CallCounters::default());
        let err = bootstrap_domain_diagram("rules", &problem, &StyleMap::default_for(id), &p, 3, None);
        assert!(matches!(err, Err(SearchError::AllCandidatesInvalid)));
        assert_eq!(p.0.get(CallKind::DomainSchemas), 2);
    }
}
