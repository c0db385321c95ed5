//! Fuses detector verdicts with an external rule engine's verdicts.
//!
//! The rule engine (e.g. a signature-based WAF) is ingested, never run:
//! its per-request verdicts arrive in a file. Combination is a logical AND
//! on the attack label. The rule expert's false positives get vetoed by the
//! detector and vice versa, so the combined false-positive set is the
//! intersection of the experts'.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::verdict::{Label, Verdict};

/// Attack iff both experts say attack; the score always passes through
/// from the detector (the rule expert has no score).
pub fn combine(detector: Verdict, rules: Label) -> Verdict {
    match (detector.label, rules) {
        (Label::Attack, Label::Attack) => detector,
        _ => Verdict {
            label: Label::Normal,
            score: detector.score,
        },
    }
}

/// Per-request verdicts of the external rule engine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleVerdictSet {
    verdicts: HashMap<String, Label>,
}

impl RuleVerdictSet {
    /// Parses `<request-id><TAB><normal|attack>` lines. Columns after the
    /// label (such as the score emitted by verdict output) are ignored, so
    /// one detector's output chains directly into another run as rules.
    pub fn from_tsv_text(text: &str, file: &str) -> Result<RuleVerdictSet> {
        let mut verdicts = HashMap::new();
        for (ix, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::MalformedLine {
                file: file.to_string(),
                line: ix + 1,
                reason,
            };
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected <id><TAB><normal|attack>".to_string()))?;
            let label_text = rest.split('\t').next().unwrap_or(rest);
            let label = Label::parse(label_text)
                .ok_or_else(|| malformed(format!("unknown label {label_text:?}")))?;
            if verdicts.insert(id.to_string(), label).is_some() {
                return Err(Error::DuplicateId {
                    id: id.to_string(),
                    line: ix + 1,
                });
            }
        }
        Ok(RuleVerdictSet { verdicts })
    }

    /// Helper mode: a bare list of attack-flagged ids, one per line; every
    /// id not listed is implied normal.
    pub fn from_attack_ids_text(text: &str) -> Result<RuleVerdictSet> {
        let mut verdicts = HashMap::new();
        for (ix, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if verdicts.insert(line.to_string(), Label::Attack).is_some() {
                return Err(Error::DuplicateId {
                    id: line.to_string(),
                    line: ix + 1,
                });
            }
        }
        Ok(RuleVerdictSet { verdicts })
    }

    pub fn load_tsv(path: &Path) -> Result<RuleVerdictSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RuleVerdictSet::from_tsv_text(&text, &path.display().to_string())
    }

    pub fn load_attack_ids(path: &Path) -> Result<RuleVerdictSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RuleVerdictSet::from_attack_ids_text(&text)
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.verdicts.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }
}

/// Combines against the rule set, treating ids the rule expert never saw
/// as normal (fail-open keeps the false-positive reduction intact); the
/// returned flag reports whether the id was missing so callers can count
/// and surface data gaps.
pub fn combine_with_set(detector: Verdict, rules: &RuleVerdictSet, id: &str) -> (Verdict, bool) {
    match rules.get(id) {
        Some(label) => (combine(detector, label), false),
        None => (combine(detector, Label::Normal), true),
    }
}
