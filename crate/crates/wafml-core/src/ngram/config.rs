//! Per-field configuration for the n-gram detector.
//!
//! Config files are line-oriented. Each non-comment line names a field
//! pattern followed by options:
//!
//! ```text
//! default n=3 mode=frequency
//! uri delimiter=/ mode=count n=1
//! header cookie n=1
//! param pwd* n=1
//! param search excluded
//! param name prior=firstnames
//! ```
//!
//! Patterns are `default`, `uri`, `body`, `header <name>`, `param <name>`;
//! a name's trailing `*` makes it a prefix glob. Resolution order: exact
//! match, then the longest matching glob (first declared wins ties), then
//! the `default` line, then the built-in default. Header names match
//! case-insensitively, parameter names exactly. Options a matched rule
//! leaves unset fall through to the default layer. Names containing
//! whitespace are not expressible; delimiter regexes must use `\s` instead
//! of literal spaces.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::FieldKey;

pub const DEFAULT_N_MAX: usize = 3;

/// How an n-gram's presence in a field is quantified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    /// Occurrence count.
    Count,
    /// Occurrence count divided by the number of same-order n-grams.
    Frequency,
}

/// A delimiter regex kept with its source text so configs serialize.
#[derive(Debug, Clone)]
pub struct Delimiter {
    pattern: String,
    regex: Regex,
}

impl Delimiter {
    pub fn new(pattern: &str) -> Result<Delimiter> {
        let regex = Regex::new(pattern).map_err(|source| Error::InvalidRegex {
            pattern: pattern.to_string(),
            source,
        })?;
        Ok(Delimiter {
            pattern: pattern.to_string(),
            regex,
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }
}

impl PartialEq for Delimiter {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern
    }
}

/// Effective configuration of one model field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub n_max: usize,
    /// None means character tokens.
    pub delimiter: Option<Delimiter>,
    pub mode: ValueMode,
    pub excluded: bool,
    pub prior: Option<String>,
}

impl FieldConfig {
    fn base(n_max: usize) -> FieldConfig {
        FieldConfig {
            n_max,
            delimiter: None,
            mode: ValueMode::Frequency,
            excluded: false,
            prior: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Pattern {
    Default,
    Uri,
    Body,
    /// Lowercased; trailing `*` is a prefix glob.
    Header(String),
    /// Case-sensitive; trailing `*` is a prefix glob.
    Param(String),
}

impl Pattern {
    fn parse(scope: &str, name: Option<&str>) -> Option<Pattern> {
        match (scope, name) {
            ("default", None) => Some(Pattern::Default),
            ("uri", None) => Some(Pattern::Uri),
            ("body", None) => Some(Pattern::Body),
            ("header", Some(n)) => Some(Pattern::Header(n.to_ascii_lowercase())),
            ("param", Some(n)) => Some(Pattern::Param(n.to_string())),
            _ => None,
        }
    }

    fn wire_name(&self) -> String {
        match self {
            Pattern::Default => "default".to_string(),
            Pattern::Uri => "uri".to_string(),
            Pattern::Body => "body".to_string(),
            Pattern::Header(n) => format!("header:{n}"),
            Pattern::Param(n) => format!("param:{n}"),
        }
    }

    fn from_wire_name(s: &str) -> Option<Pattern> {
        match s {
            "default" => Some(Pattern::Default),
            "uri" => Some(Pattern::Uri),
            "body" => Some(Pattern::Body),
            _ => {
                if let Some(n) = s.strip_prefix("header:") {
                    Some(Pattern::Header(n.to_string()))
                } else {
                    s.strip_prefix("param:").map(|n| Pattern::Param(n.to_string()))
                }
            }
        }
    }

    /// Matches a key exactly (no glob semantics).
    fn matches_exact(&self, key: &FieldKey) -> bool {
        match (self, key) {
            (Pattern::Uri, FieldKey::Uri) => true,
            (Pattern::Body, FieldKey::Body) => true,
            (Pattern::Header(p), FieldKey::Header(n)) => !p.ends_with('*') && p == n,
            (Pattern::Param(p), FieldKey::Param(n)) => !p.ends_with('*') && p == n,
            _ => false,
        }
    }

    /// Glob prefix length when this pattern matches the key as a glob.
    fn glob_match_len(&self, key: &FieldKey) -> Option<usize> {
        let (pat, name) = match (self, key) {
            (Pattern::Header(p), FieldKey::Header(n)) => (p, n),
            (Pattern::Param(p), FieldKey::Param(n)) => (p, n),
            _ => return None,
        };
        let prefix = pat.strip_suffix('*')?;
        name.starts_with(prefix).then_some(prefix.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    pattern: Pattern,
    n_max: Option<usize>,
    delimiter: Option<Delimiter>,
    mode: Option<ValueMode>,
    excluded: bool,
    prior: Option<String>,
}

/// Where a config set came from; built-in sets apply name heuristics that
/// files deliberately do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Source {
    Builtin,
    File,
}

/// A full rule set resolving any field key to its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSet {
    rules: Vec<Rule>,
    source: Source,
    default_n: usize,
}

impl ConfigSet {
    /// Built-in profile: character trigrams in frequency mode, URI split on
    /// "/" as count monograms, password-like and identifier-like parameters
    /// as monograms.
    pub fn builtin(default_n: usize) -> ConfigSet {
        ConfigSet {
            rules: vec![Rule {
                pattern: Pattern::Uri,
                n_max: Some(1),
                delimiter: Some(Delimiter::new("/").expect("literal slash compiles")),
                mode: Some(ValueMode::Count),
                excluded: false,
                prior: None,
            }],
            source: Source::Builtin,
            default_n,
        }
    }

    /// Parses a config file. `default_n` seeds the default layer when the
    /// file has no `default` line.
    pub fn from_file_text(text: &str, default_n: usize) -> Result<ConfigSet> {
        let mut rules = Vec::new();
        for (ix, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| Error::MalformedLine {
                file: "field config".to_string(),
                line: ix + 1,
                reason: reason.to_string(),
            };
            let mut tokens = line.split_whitespace();
            let scope = tokens.next().expect("non-empty line");
            let needs_name = matches!(scope, "header" | "param");
            let name = if needs_name {
                Some(tokens.next().ok_or_else(|| err("missing field name"))?)
            } else {
                None
            };
            let pattern = Pattern::parse(scope, name)
                .ok_or_else(|| err(&format!("unknown field pattern {scope:?}")))?;
            if rules.iter().any(|r: &Rule| r.pattern == pattern) {
                return Err(err(&format!(
                    "duplicate pattern {:?}",
                    pattern.wire_name()
                )));
            }

            let mut rule = Rule {
                pattern,
                n_max: None,
                delimiter: None,
                mode: None,
                excluded: false,
                prior: None,
            };
            for opt in tokens {
                if opt == "excluded" {
                    rule.excluded = true;
                } else if let Some(v) = opt.strip_prefix("n=") {
                    let n: usize = v.parse().map_err(|_| err(&format!("bad n value {v:?}")))?;
                    if n == 0 {
                        return Err(err("n must be at least 1"));
                    }
                    rule.n_max = Some(n);
                } else if let Some(v) = opt.strip_prefix("delimiter=") {
                    rule.delimiter = Some(Delimiter::new(v)?);
                } else if let Some(v) = opt.strip_prefix("mode=") {
                    rule.mode = Some(match v {
                        "count" => ValueMode::Count,
                        "frequency" => ValueMode::Frequency,
                        _ => return Err(err(&format!("unknown mode {v:?}"))),
                    });
                } else if let Some(v) = opt.strip_prefix("prior=") {
                    rule.prior = Some(v.to_string());
                } else {
                    return Err(err(&format!("unknown option {opt:?}")));
                }
            }
            rules.push(rule);
        }
        Ok(ConfigSet {
            rules,
            source: Source::File,
            default_n,
        })
    }

    pub fn load(path: &std::path::Path, default_n: usize) -> Result<ConfigSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigSet::from_file_text(&text, default_n)
    }

    fn default_layer(&self) -> FieldConfig {
        let mut cfg = FieldConfig::base(self.default_n);
        if let Some(rule) = self.rules.iter().find(|r| r.pattern == Pattern::Default) {
            overlay(&mut cfg, rule);
        }
        cfg
    }

    /// Resolves the effective configuration for a field key.
    pub fn resolve(&self, key: &FieldKey) -> FieldConfig {
        let mut cfg = self.default_layer();
        if let Some(rule) = self.rules.iter().find(|r| r.pattern.matches_exact(key)) {
            overlay(&mut cfg, rule);
            return cfg;
        }
        let glob = self
            .rules
            .iter()
            .filter_map(|r| r.pattern.glob_match_len(key).map(|len| (len, r)))
            .max_by_key(|&(len, _)| len);
        if let Some((_, rule)) = glob {
            overlay(&mut cfg, rule);
            return cfg;
        }
        if self.source == Source::Builtin {
            if let FieldKey::Param(name) = key {
                if is_secret_or_id_name(name) {
                    cfg.n_max = 1;
                }
            }
        }
        cfg
    }

    /// Prior ids referenced by any rule, with the tokenization they imply.
    /// Errors when two rules share an id under different tokenization.
    pub fn prior_requirements(&self) -> Result<Vec<PriorRequirement>> {
        let mut reqs: Vec<PriorRequirement> = Vec::new();
        for rule in &self.rules {
            let Some(id) = &rule.prior else { continue };
            let cfg = self.config_for_rule(rule);
            if cfg.mode == ValueMode::Count {
                // Priors are frequency signatures; comparing them against
                // raw counts would mix units.
                return Err(Error::Config(format!(
                    "prior {id:?} attached to a count-mode field"
                )));
            }
            let req = PriorRequirement {
                id: id.clone(),
                n_max: cfg.n_max,
                delimiter: cfg.delimiter.clone(),
            };
            match reqs.iter().find(|r| &r.id == id) {
                Some(existing) if *existing != req => {
                    return Err(Error::Config(format!(
                        "prior {id:?} referenced with conflicting tokenization"
                    )));
                }
                Some(_) => {}
                None => reqs.push(req),
            }
        }
        Ok(reqs)
    }

    fn config_for_rule(&self, rule: &Rule) -> FieldConfig {
        let mut cfg = self.default_layer();
        overlay(&mut cfg, rule);
        cfg
    }
}

fn overlay(cfg: &mut FieldConfig, rule: &Rule) {
    if rule.pattern == Pattern::Default && rule.excluded {
        // An excluded default turns the file into an allowlist.
        cfg.excluded = true;
    } else if rule.pattern != Pattern::Default {
        cfg.excluded = rule.excluded;
    }
    if let Some(n) = rule.n_max {
        cfg.n_max = n;
    }
    if let Some(d) = &rule.delimiter {
        cfg.delimiter = Some(d.clone());
    }
    if let Some(m) = rule.mode {
        cfg.mode = m;
    }
    if let Some(p) = &rule.prior {
        cfg.prior = Some(p.clone());
    }
}

/// Password-like or identifier-like parameter names get monograms by
/// default: their values are near-random strings whose higher-order grams
/// never stabilize.
fn is_secret_or_id_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.contains("pass")
        || lower.contains("pwd")
        || lower.contains("login")
        || lower.contains("user")
        || lower == "dni"
        || lower == "id"
        || lower.ends_with("id")
}

/// A prior corpus the config demands, with its tokenization.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorRequirement {
    pub id: String,
    pub n_max: usize,
    pub delimiter: Option<Delimiter>,
}

// ---------------------------------------------------------------------------
// Wire form

#[derive(Serialize, Deserialize)]
pub(crate) struct WireConfigSet {
    default_n: usize,
    rules: Vec<WireRule>,
    source: Source,
}

#[derive(Serialize, Deserialize)]
struct WireRule {
    delimiter: Option<String>,
    excluded: bool,
    mode: Option<ValueMode>,
    n_max: Option<usize>,
    pattern: String,
    prior: Option<String>,
}

impl ConfigSet {
    pub(crate) fn to_wire(&self) -> WireConfigSet {
        WireConfigSet {
            default_n: self.default_n,
            rules: self
                .rules
                .iter()
                .map(|r| WireRule {
                    delimiter: r.delimiter.as_ref().map(|d| d.pattern.clone()),
                    excluded: r.excluded,
                    mode: r.mode,
                    n_max: r.n_max,
                    pattern: r.pattern.wire_name(),
                    prior: r.prior.clone(),
                })
                .collect(),
            source: self.source,
        }
    }

    pub(crate) fn from_wire(wire: WireConfigSet) -> Result<ConfigSet> {
        let mut rules = Vec::with_capacity(wire.rules.len());
        for wr in wire.rules {
            let pattern = Pattern::from_wire_name(&wr.pattern).ok_or_else(|| {
                Error::InvalidModel(format!("bad config pattern {:?}", wr.pattern))
            })?;
            rules.push(Rule {
                pattern,
                n_max: wr.n_max,
                delimiter: wr.delimiter.as_deref().map(Delimiter::new).transpose()?,
                mode: wr.mode,
                excluded: wr.excluded,
                prior: wr.prior,
            });
        }
        Ok(ConfigSet {
            rules,
            source: wire.source,
            default_n: wire.default_n,
        })
    }
}

pub(crate) fn field_config_to_wire(cfg: &FieldConfig) -> WireFieldConfig {
    WireFieldConfig {
        delimiter: cfg.delimiter.as_ref().map(|d| d.pattern.clone()),
        excluded: cfg.excluded,
        mode: cfg.mode,
        n_max: cfg.n_max,
        prior: cfg.prior.clone(),
    }
}

pub(crate) fn field_config_from_wire(wire: WireFieldConfig) -> Result<FieldConfig> {
    Ok(FieldConfig {
        n_max: wire.n_max,
        delimiter: wire.delimiter.as_deref().map(Delimiter::new).transpose()?,
        mode: wire.mode,
        excluded: wire.excluded,
        prior: wire.prior,
    })
}

#[derive(Serialize, Deserialize)]
pub(crate) struct WireFieldConfig {
    delimiter: Option<String>,
    excluded: bool,
    mode: ValueMode,
    n_max: usize,
    prior: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(name: &str) -> FieldKey {
        FieldKey::header(name)
    }

    fn param(name: &str) -> FieldKey {
        FieldKey::Param(name.to_string())
    }

    #[test]
    fn builtin_profile_defaults() {
        let set = ConfigSet::builtin(DEFAULT_N_MAX);
        let uri = set.resolve(&FieldKey::Uri);
        assert_eq!(uri.n_max, 1);
        assert_eq!(uri.mode, ValueMode::Count);
        assert_eq!(uri.delimiter.as_ref().unwrap().pattern(), "/");

        let plain = set.resolve(&param("q"));
        assert_eq!(plain.n_max, 3);
        assert_eq!(plain.mode, ValueMode::Frequency);
        assert!(plain.delimiter.is_none());
        assert!(!plain.excluded);

        for secret in ["password", "pwd2", "login", "userid", "DNI", "id"] {
            assert_eq!(set.resolve(&param(secret)).n_max, 1, "{secret}");
        }
    }

    #[test]
    fn file_rules_and_resolution_order() {
        let text = "\
# test config
default n=2
uri delimiter=/ mode=count n=1
header cookie n=1
param pwd* n=1
param pwd_exact n=4
param junk excluded
";
        let set = ConfigSet::from_file_text(text, DEFAULT_N_MAX).unwrap();
        assert_eq!(set.resolve(&param("other")).n_max, 2);
        assert_eq!(set.resolve(&FieldKey::Uri).mode, ValueMode::Count);
        // Header matching is case-insensitive.
        assert_eq!(set.resolve(&header("Cookie")).n_max, 1);
        // Exact beats glob.
        assert_eq!(set.resolve(&param("pwd_exact")).n_max, 4);
        assert_eq!(set.resolve(&param("pwd_glob")).n_max, 1);
        assert!(set.resolve(&param("junk")).excluded);
        // File configs switch off built-in name heuristics.
        assert_eq!(set.resolve(&param("password")).n_max, 2);
    }

    #[test]
    fn longest_glob_wins() {
        let text = "param a* n=1\nparam ab* n=5\n";
        let set = ConfigSet::from_file_text(text, 3).unwrap();
        assert_eq!(set.resolve(&param("abc")).n_max, 5);
        assert_eq!(set.resolve(&param("axe")).n_max, 1);
    }

    #[test]
    fn unset_options_fall_through_to_default_line() {
        let text = "default mode=count n=2\nparam x n=5\n";
        let set = ConfigSet::from_file_text(text, 3).unwrap();
        let x = set.resolve(&param("x"));
        assert_eq!(x.n_max, 5);
        assert_eq!(x.mode, ValueMode::Count);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            ConfigSet::from_file_text("header\n", 3)
                .unwrap_err()
                .category(),
            "malformed_line"
        );
        assert_eq!(
            ConfigSet::from_file_text("uri n=0\n", 3)
                .unwrap_err()
                .category(),
            "malformed_line"
        );
        assert_eq!(
            ConfigSet::from_file_text("uri bogus=1\n", 3)
                .unwrap_err()
                .category(),
            "malformed_line"
        );
        assert_eq!(
            ConfigSet::from_file_text("uri n=1\nuri n=2\n", 3)
                .unwrap_err()
                .category(),
            "malformed_line"
        );
        assert_eq!(
            ConfigSet::from_file_text("param x delimiter=[\n", 3)
                .unwrap_err()
                .category(),
            "invalid_regex"
        );
    }

    #[test]
    fn prior_requirements_detect_conflicts() {
        let ok = ConfigSet::from_file_text("param a prior=names\nparam b prior=names\n", 3)
            .unwrap()
            .prior_requirements()
            .unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok[0].id, "names");
        assert_eq!(ok[0].n_max, 3);

        let err = ConfigSet::from_file_text("param a prior=names\nparam b prior=names n=2\n", 3)
            .unwrap()
            .prior_requirements()
            .unwrap_err();
        assert_eq!(err.category(), "config");
    }

    #[test]
    fn wire_round_trip() {
        let text = "default n=2\nuri delimiter=/ mode=count n=1\nparam pwd* n=1 prior=p\n";
        let set = ConfigSet::from_file_text(text, 3).unwrap();
        let back = ConfigSet::from_wire(serde_json::from_str(
            &serde_json::to_string(&set.to_wire()).unwrap(),
        )
        .unwrap())
        .unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn excluded_default_is_an_allowlist() {
        let text = "default excluded\nparam keep n=1\n";
        let set = ConfigSet::from_file_text(text, 3).unwrap();
        assert!(!set.resolve(&param("keep")).excluded);
        assert!(set.resolve(&param("drop")).excluded);
        assert!(set.resolve(&FieldKey::Uri).excluded);
    }
}
