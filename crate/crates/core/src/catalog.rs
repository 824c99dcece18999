//! Rule manifests: one rule per line as `id tag concept`, where tag is
//! `prop` or `fol`. Blank lines and `#` comments are skipped.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{self, Concept, FeatureVocab};

const BUILTIN: &str = include_str!("catalog.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleTag {
    Prop,
    Fol,
}

impl RuleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleTag::Prop => "prop",
            RuleTag::Fol => "fol",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleEntry {
    pub id: String,
    pub tag: RuleTag,
    pub concept: Concept,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("manifest line {line}: {msg}")]
pub struct ManifestError {
    pub line: usize,
    pub msg: String,
}

/// Parses every line; good entries and per-line errors are returned together
/// so one bad rule never hides the rest.
pub fn parse_manifest(text: &str, vocab: &FeatureVocab) -> (Vec<RuleEntry>, Vec<ManifestError>) {
    let mut rules = Vec::new();
    let mut errors = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut parts = l.splitn(3, char::is_whitespace);
        let (Some(id), Some(tag), Some(src)) = (parts.next(), parts.next(), parts.next()) else {
            errors.push(ManifestError { line, msg: "expected `id tag concept`".into() });
            continue;
        };
        let tag = match tag {
            "prop" => RuleTag::Prop,
            "fol" => RuleTag::Fol,
            other => {
                errors.push(ManifestError { line, msg: format!("unknown tag `{other}`") });
                continue;
            }
        };
        if !seen.insert(id.to_string()) {
            errors.push(ManifestError { line, msg: format!("duplicate rule id `{id}`") });
            continue;
        }
        match dsl::parse(src.trim(), vocab) {
            Ok(concept) => rules.push(RuleEntry { id: id.to_string(), tag, concept }),
            Err(e) => errors.push(ManifestError { line, msg: format!("rule {id}: {e}") }),
        }
    }
    (rules, errors)
}

pub fn builtin_manifest() -> &'static str {
    BUILTIN
}

/// The built-in 112-rule catalog over the example vocabulary.
pub fn builtin_catalog() -> Vec<RuleEntry> {
    let (rules, errors) = parse_manifest(BUILTIN, &FeatureVocab::example());
    debug_assert!(errors.is_empty(), "{errors:?}");
    rules
}

pub struct ManifestDisplay<'a>(pub &'a [RuleEntry], pub &'a FeatureVocab);

impl fmt::Display for ManifestDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.0 {
            writeln!(f, "{} {} {}", r.id, r.tag.as_str(), r.concept.to_source(self.1))?;
        }
        Ok(())
    }
}
