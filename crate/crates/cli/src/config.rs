//! Layered settings: built-in defaults, then a `key = value` file, then
//! environment variables, then `--set` flags. Keys are dotted
//! (`search.k = 4`); a bare key is accepted when exactly one section has it.

use std::collections::BTreeMap;

use vplan_core::proposer::ProposerConfig;
use vplan_core::search::SearchConfig;
use vplan_core::sim::{DomainId, FaultModel};

pub const KEYS: [&str; 30] = [
    "search.n",
    "search.k",
    "search.backtracks",
    "search.max_states",
    "search.max_depth",
    "search.schema_retries",
    "search.code_retries",
    "search.no_diagram",
    "search.no_schema",
    "search.code_as_context",
    "search.no_beam",
    "search.no_backtrack",
    "search.seed",
    "search.workers",
    "faults.invalid_action_rate",
    "faults.local_false_negative_rate",
    "faults.global_false_negative_rate",
    "faults.ranking_noise",
    "faults.seed",
    "proposer.kind",
    "proposer.endpoint",
    "proposer.api_key",
    "proposer.model",
    "proposer.temperatures",
    "proposer.timeout_secs",
    "proposer.max_retries",
    "proposer.max_in_flight",
    "proposer.templates",
    "proposer.transcripts",
    "bench.workers",
];

const ENV: [(&str, &str); 3] = [
    ("VP_ENDPOINT", "proposer.endpoint"),
    ("VP_API_KEY", "proposer.api_key"),
    ("VP_MODEL", "proposer.model"),
];

/// A problem with user-supplied settings; reported as a usage error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Full key for `key`, resolving bare names.
pub fn resolve_key(key: &str) -> Result<&'static str, ConfigError> {
    if let Some(k) = KEYS.iter().find(|k| **k == key) {
        return Ok(k);
    }
    let matches: Vec<&'static str> = KEYS
        .iter()
        .copied()
        .filter(|k| k.split_once('.').map(|(_, tail)| tail) == Some(key))
        .collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => err(format!("unknown setting `{key}`")),
        _ => err(format!("ambiguous setting `{key}`: {}", matches.join(", "))),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    values: BTreeMap<&'static str, String>,
}

impl CliConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = resolve_key(key)?;
        self.values.insert(k, value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Merge a config file: `key = value` lines, `#` comments.
    pub fn load_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("config line {}: expected `key = value`", i + 1));
            };
            self.set(k.trim(), v).map_err(|e| ConfigError(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn load_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (var, key) in ENV {
            if let Some(v) = lookup(var).filter(|v| !v.is_empty()) {
                self.values.insert(key, v);
            }
        }
    }

    /// Merge `key=value` flags.
    pub fn load_flags(&mut self, flags: &[String]) -> Result<(), ConfigError> {
        for f in flags {
            let Some((k, v)) = f.split_once('=') else {
                return err(format!("--set expects key=value, got `{f}`"));
            };
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("invalid value `{v}` for {key}"))),
        }
    }

    fn flag(&self, key: &str, slot: &mut bool) -> Result<(), ConfigError> {
        if let Some(v) = self.get(key) {
            *slot = match v {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return err(format!("invalid value `{v}` for {key}, expected true or false")),
            };
        }
        Ok(())
    }

    pub fn search(&self, id: Option<DomainId>) -> Result<SearchConfig, ConfigError> {
        let mut c = match id {
            Some(id) => SearchConfig::for_domain(id),
            None => SearchConfig::default(),
        };
        macro_rules! num {
            ($key:literal, $field:ident) => {
                if let Some(v) = self.parsed($key)? {
                    c.$field = v;
                }
            };
        }
        num!("search.n", n);
        num!("search.k", k);
        num!("search.backtracks", backtracks);
        num!("search.max_states", max_states);
        num!("search.max_depth", max_depth);
        num!("search.schema_retries", schema_retries);
        num!("search.code_retries", code_retries);
        num!("search.seed", seed);
        num!("search.workers", workers);
        self.flag("search.no_diagram", &mut c.no_diagram)?;
        self.flag("search.no_schema", &mut c.no_schema)?;
        self.flag("search.code_as_context", &mut c.code_as_context)?;
        self.flag("search.no_beam", &mut c.no_beam)?;
        self.flag("search.no_backtrack", &mut c.no_backtrack)?;
        c.validate().map_err(ConfigError)?;
        Ok(c)
    }

    pub fn faults(&self) -> Result<FaultModel, ConfigError> {
        let mut f = FaultModel::default();
        macro_rules! num {
            ($key:literal, $field:ident) => {
                if let Some(v) = self.parsed($key)? {
                    f.$field = v;
                }
            };
        }
        num!("faults.invalid_action_rate", invalid_action_rate);
        num!("faults.local_false_negative_rate", local_false_negative_rate);
        num!("faults.global_false_negative_rate", global_false_negative_rate);
        num!("faults.ranking_noise", ranking_noise);
        num!("faults.seed", seed);
        f.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(f)
    }

    pub fn proposer(&self) -> Result<ProposerConfig, ConfigError> {
        let mut p = ProposerConfig::default();
        if let Some(v) = self.get("proposer.endpoint") {
            p.endpoint = v.to_string();
        }
        if let Some(v) = self.get("proposer.model") {
            p.model = v.to_string();
        }
        if let Some(v) = self.get("proposer.templates") {
            p.templates = v.to_string();
        }
        if let Some(v) = self.get("proposer.temperatures") {
            p.temperatures = v
                .split(',')
                .map(|t| t.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| ConfigError(format!("invalid temperatures `{v}`")))?;
        }
        if let Some(v) = self.parsed("proposer.timeout_secs")? {
            p.timeout_secs = v;
        }
        if let Some(v) = self.parsed("proposer.max_retries")? {
            p.max_retries = v;
        }
        if let Some(v) = self.parsed("proposer.max_in_flight")? {
            p.max_in_flight = v;
        }
        Ok(p)
    }

    pub fn bench_workers(&self) -> Result<usize, ConfigError> {
        Ok(self.parsed("bench.workers")?.unwrap_or(1).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_layers_win() {
        let mut c = CliConfig::default();
        c.load_file("search.k = 2\n# note\nproposer.endpoint = http://file\nmax_states = 50\n").unwrap();
        c.load_env(|v| (v == "VP_ENDPOINT").then(|| "http://env".to_string()));
        c.load_flags(&["search.k=3".into()]).unwrap();
        let s = c.search(Some(DomainId::Blocksworld)).unwrap();
        assert_eq!((s.k, s.max_states, s.max_depth), (3, 50, 28));
        assert_eq!(c.proposer().unwrap().endpoint, "http://env");
    }

    #[test]
    fn unknown_and_malformed_settings_are_rejected() {
        let mut c = CliConfig::default();
        assert!(c.load_file("search.beam = 4").is_err());
        assert!(c.load_file("just words").is_err());
        assert!(c.load_flags(&["seed=1".into()]).is_err(), "seed is in two sections");
        c.load_flags(&["no_beam=maybe".into()]).unwrap();
        assert!(c.search(None).is_err());
        let mut c = CliConfig::default();
        c.set("ranking_noise", "1.5").unwrap();
        assert!(c.faults().is_err());
    }
}
