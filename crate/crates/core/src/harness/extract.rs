use serde::{Deserialize, Serialize};

use super::prompt::PromptMode;
use super::HarnessError;

pub const NON_BOOLEAN: &str = "non-boolean completion";
pub const OBJECT_MISMATCH: &str = "object mismatch";
pub const ABSTAINED: &str = "abstained";
pub const MISSING: &str = "missing label";

/// The single True/False token-family rule shared by label extraction and
/// logprob summing: case-insensitive, surrounding whitespace ignored.
pub fn label_family(token: &str) -> Option<bool> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("true") {
        Some(true)
    } else if t.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLabel {
    pub label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<f64>,
}

impl ObjectLabel {
    pub fn labeled(b: bool) -> Self {
        ObjectLabel { label: Some(b), reason: None, p_true: None }
    }

    pub fn excluded(reason: &str) -> Self {
        ObjectLabel { label: None, reason: Some(reason.to_string()), p_true: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extraction {
    pub labels: Vec<ObjectLabel>,
    pub rule_text: Option<String>,
}

impl Extraction {
    pub fn excluded(&self) -> usize {
        self.labels.iter().filter(|l| l.label.is_none()).count()
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase()
}

fn first_word(s: &str) -> &str {
    s.split(|c: char| c.is_whitespace() || c == ',' || c == '.' || c == ';')
        .find(|w| !w.is_empty())
        .unwrap_or("")
}

/// Splits `- object -> label` (also `:` or `=` as separator); bare label
/// lines give no object.
fn split_label_line(line: &str) -> Option<(Option<&str>, &str)> {
    let l = line.trim().trim_start_matches(['-', '*', '•']).trim();
    let l = l.trim_start_matches(|c: char| c.is_ascii_digit()).trim_start_matches(['.', ')']).trim();
    if l.is_empty() {
        return None;
    }
    for sep in ["->", "=>", ":", "="] {
        if let Some((obj, lab)) = l.rsplit_once(sep) {
            return (!lab.trim().is_empty()).then(|| (Some(obj.trim()), lab.trim()));
        }
    }
    label_family(first_word(l)).map(|_| (None, l))
}

/// Labels for the `expected` objects of one query set. Every expected object
/// receives either a label or an exclusion reason.
pub fn extract_labels(response: &str, expected: &[String], mode: PromptMode) -> Extraction {
    match mode {
        PromptMode::Completion => {
            let mut lines = response.lines().map(str::trim).filter(|l| !l.is_empty());
            let labels = expected
                .iter()
                .map(|_| match lines.next() {
                    None => ObjectLabel::excluded(MISSING),
                    Some(l) => match label_family(first_word(l)) {
                        Some(b) => ObjectLabel::labeled(b),
                        None => ObjectLabel::excluded(NON_BOOLEAN),
                    },
                })
                .collect();
            Extraction { labels, rule_text: None }
        }
        PromptMode::Chat | PromptMode::ChatElicitation => {
            let mut rule_text = None;
            let mut entries = Vec::new();
            for line in response.lines() {
                let t = line.trim();
                if let Some(rest) = t.strip_prefix("Rule:").or_else(|| t.strip_prefix("rule:")) {
                    if rule_text.is_none() {
                        rule_text = Some(rest.trim().to_string());
                    }
                    continue;
                }
                if let Some(e) = split_label_line(t) {
                    entries.push(e);
                }
            }
            let mut entries = entries.into_iter();
            let labels = expected
                .iter()
                .map(|want| match entries.next() {
                    None => ObjectLabel::excluded(MISSING),
                    Some((obj, lab)) => {
                        if obj.is_some_and(|o| normalize(o) != normalize(want)) {
                            ObjectLabel::excluded(OBJECT_MISMATCH)
                        } else {
                            match label_family(first_word(lab)) {
                                Some(b) => ObjectLabel::labeled(b),
                                None => ObjectLabel::excluded(ABSTAINED),
                            }
                        }
                    }
                })
                .collect();
            Extraction { labels, rule_text }
        }
    }
}

/// Normalized True mass among the top-k alternatives at the label position.
pub fn true_probability(top: &[(String, f64)]) -> Result<f64, HarnessError> {
    let (mut mt, mut mf) = (0.0, 0.0);
    for (tok, lp) in top {
        match label_family(tok) {
            Some(true) => mt += lp.exp(),
            Some(false) => mf += lp.exp(),
            None => {}
        }
    }
    if mt + mf <= 0.0 {
        return Err(HarnessError::DegenerateMass);
    }
    Ok(mt / (mt + mf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objs(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn tops(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(t, p)| (t.to_string(), p.ln())).collect()
    }

    #[test]
    fn completion_variants() {
        let one = objs(&["small blue circle"]);
        assert_eq!(extract_labels(" true", &one, PromptMode::Completion).labels[0], ObjectLabel::labeled(true));
        assert_eq!(extract_labels("FALSE\n", &one, PromptMode::Completion).labels[0], ObjectLabel::labeled(false));
        assert_eq!(extract_labels("Maybe", &one, PromptMode::Completion).labels[0], ObjectLabel::excluded(NON_BOOLEAN));
        assert_eq!(extract_labels("", &one, PromptMode::Completion).labels[0], ObjectLabel::excluded(MISSING));
    }

    #[test]
    fn chat_alignment() {
        let q = objs(&["small blue circle", "large green triangle", "medium yellow rectangle"]);
        let reply = "Rule: blue things\n- small blue circle -> True\n- large red square -> False\n- medium yellow rectangle -> unsure\n";
        let e = extract_labels(reply, &q, PromptMode::ChatElicitation);
        assert_eq!(e.rule_text.as_deref(), Some("blue things"));
        assert_eq!(
            e.labels,
            vec![ObjectLabel::labeled(true), ObjectLabel::excluded(OBJECT_MISMATCH), ObjectLabel::excluded(ABSTAINED)]
        );
        assert_eq!(e.excluded() + e.labels.iter().filter(|l| l.label.is_some()).count(), q.len());
    }

    #[test]
    fn chat_bare_labels_and_spacing() {
        let q = objs(&["small blue circle", "large green triangle"]);
        let e = extract_labels("1. True\n2.  false", &q, PromptMode::Chat);
        assert_eq!(e.labels, vec![ObjectLabel::labeled(true), ObjectLabel::labeled(false)]);
        let e = extract_labels("Small  Blue circle: TRUE", &q, PromptMode::Chat);
        assert_eq!(e.labels, vec![ObjectLabel::labeled(true), ObjectLabel::excluded(MISSING)]);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(true_probability(&tops(&[(" True", 0.9)])).unwrap(), 1.0);
        assert!((true_probability(&tops(&[("True", 0.6), ("False", 0.2)])).unwrap() - 0.75).abs() < 1e-12);
        let v = tops(&[("True", 0.3), ("true", 0.3), ("False", 0.2), ("Maybe", 0.1)]);
        assert!((true_probability(&v).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(true_probability(&tops(&[("The", 0.5)])), Err(HarnessError::DegenerateMass)));
    }
}
