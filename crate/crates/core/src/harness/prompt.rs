use serde::{Deserialize, Serialize};

use crate::dsl::FeatureVocab;
use crate::exemplar::{ExemplarList, LabeledSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    Chat,
    Completion,
    ChatElicitation,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Chat => "chat",
            PromptMode::Completion => "completion",
            PromptMode::ChatElicitation => "chat-elicitation",
        }
    }

    pub fn is_chat(self) -> bool {
        !matches!(self, PromptMode::Completion)
    }
}

impl std::str::FromStr for PromptMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chat" => Ok(PromptMode::Chat),
            "completion" => Ok(PromptMode::Completion),
            "chat-elicitation" | "chat+elicitation" => Ok(PromptMode::ChatElicitation),
            _ => Err(format!("unknown prompt mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// A prompt for one query set. Chat modes carry role-tagged turns whose last
/// entry is the unlabeled query; completion mode carries one flat prefix
/// ending at the query set's header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub mode: PromptMode,
    pub turns: Vec<Turn>,
    pub prefix: String,
    /// Length of the history portion: a turn count in chat modes, a byte
    /// offset into `prefix` in completion mode.
    pub history_len: usize,
    /// Descriptions of the query set's objects, in order.
    pub query: Vec<String>,
}

pub const CHAT_PREAMBLE: &str = "\
We are playing a game about a secret rule. The rule decides whether each object is \"wudsy\" (True) or not (False). \
Whether an object is wudsy may depend on its own size, color and shape, and on the other objects shown with it.
In every round you will see a set of objects. Label each object in the set True or False, one per line, in the order given, \
written as `object -> True` or `object -> False`. After each round you will be shown the correct labels.";

pub const ELICITATION_REQUEST: &str = "\
Before labeling, explain the labeling rule concisely on one line starting with `Rule:`.";

pub const COMPLETION_PREAMBLE: &str = "\
The following are sets of objects labeled according to a secret rule. Each object is labeled True if it is wudsy and False otherwise. \
Whether an object is wudsy may depend on its own size, color and shape, and on the other objects in its set.";

fn describe_set(set: &LabeledSet, vocab: &FeatureVocab) -> Vec<String> {
    set.objects.iter().map(|&o| vocab.describe(o)).collect()
}

fn label_word(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn query_turn(k: usize, objects: &[String], elicit: bool) -> String {
    let mut t = format!("Set {}:\n", k + 1);
    for o in objects {
        t.push_str(&format!("- {o}\n"));
    }
    if elicit {
        t.push_str(ELICITATION_REQUEST);
        t.push('\n');
    }
    t
}

/// Builds the prompt for set `upto_set`: every earlier set with its gold labels, then the query set unlabeled.
pub fn build_prompt(list: &ExemplarList, upto_set: usize, mode: PromptMode) -> PromptBundle {
    assert!(upto_set < list.sets.len(), "set {upto_set} out of range");
    let vocab = &list.vocab;
    let query = describe_set(&list.sets[upto_set], vocab);
    match mode {
        PromptMode::Chat | PromptMode::ChatElicitation => {
            let elicit = mode == PromptMode::ChatElicitation;
            let mut turns = vec![Turn { role: Role::System, text: CHAT_PREAMBLE.to_string() }];
            for (k, set) in list.sets[..upto_set].iter().enumerate() {
                let objs = describe_set(set, vocab);
                turns.push(Turn { role: Role::User, text: query_turn(k, &objs, false) });
                let mut answer = String::new();
                for (o, &l) in objs.iter().zip(&set.labels) {
                    answer.push_str(&format!("- {o} -> {}\n", label_word(l)));
                }
                turns.push(Turn { role: Role::Assistant, text: answer });
            }
            let history_len = turns.len();
            turns.push(Turn { role: Role::User, text: query_turn(upto_set, &query, elicit) });
            PromptBundle { mode, turns, prefix: String::new(), history_len, query }
        }
        PromptMode::Completion => {
            let mut prefix = format!("{COMPLETION_PREAMBLE}\n\n");
            for (k, set) in list.sets[..upto_set].iter().enumerate() {
                prefix.push_str(&format!("Set {}:\n", k + 1));
                for (o, &l) in describe_set(set, vocab).iter().zip(&set.labels) {
                    prefix.push_str(&format!("{o} -> {}\n", label_word(l)));
                }
                prefix.push('\n');
            }
            let history_len = prefix.len();
            prefix.push_str(&format!("Set {}:\n", upto_set + 1));
            PromptBundle { mode, turns: Vec::new(), prefix, history_len, query }
        }
    }
}

impl PromptBundle {
    /// Completion-mode text asking for object `i`; earlier objects of the
    /// query set appear with their gold labels.
    pub fn completion_query(&self, gold: &[bool], i: usize) -> String {
        let mut t = self.prefix.clone();
        for (o, &l) in self.query[..i].iter().zip(gold) {
            t.push_str(&format!("{o} -> {}\n", label_word(l)));
        }
        t.push_str(&format!("{} ->", self.query[i]));
        t
    }

    /// Deterministic plain-text form used for golden files and transcripts.
    pub fn render(&self) -> String {
        if self.mode.is_chat() {
            let mut out = String::new();
            for t in &self.turns {
                let role = match t.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                out.push_str(&format!("<|{role}|>\n{}\n", t.text.trim_end()));
            }
            out
        } else {
            self.prefix.clone()
        }
    }

    pub fn history_text(&self) -> String {
        if self.mode.is_chat() {
            self.turns[..self.history_len].iter().map(|t| format!("{:?}:{}\n", t.role, t.text)).collect()
        } else {
            self.prefix[..self.history_len].to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::exemplar::generate_list;

    fn list() -> ExemplarList {
        let v = FeatureVocab::example();
        generate_list("r", &parse("(or circle blue)", &v).unwrap(), &v, 11, 5)
    }

    #[test]
    fn first_prompt_has_no_history() {
        let l = list();
        for mode in [PromptMode::Chat, PromptMode::Completion, PromptMode::ChatElicitation] {
            let p = build_prompt(&l, 0, mode);
            let history = p.history_text();
            assert!(!history.contains("Set 1"), "{history}");
            assert!(!history.lines().any(|l| l.starts_with("- ") || l.ends_with("-> True") || l.ends_with("-> False")));
            assert_eq!(p.query.len(), l.sets[0].len());
        }
    }

    #[test]
    fn history_accretes() {
        let l = list();
        for mode in [PromptMode::Chat, PromptMode::Completion] {
            for k in 0..4 {
                let a = build_prompt(&l, k, mode).history_text();
                let b = build_prompt(&l, k + 1, mode).history_text();
                assert!(b.starts_with(&a) && b.len() > a.len());
            }
        }
    }

    #[test]
    fn history_labels_are_gold() {
        let l = list();
        let p = build_prompt(&l, 4, PromptMode::Completion);
        let labels: Vec<bool> = p.prefix.lines().filter_map(|x| x.rsplit_once(" -> ")).map(|(_, l)| l == "True").collect();
        let gold: Vec<bool> = l.sets[..4].iter().flat_map(|s| s.labels.clone()).collect();
        assert_eq!(labels, gold);
    }

    #[test]
    fn completion_query_reveals_earlier_objects() {
        let l = list();
        let p = build_prompt(&l, 2, PromptMode::Completion);
        let q = p.completion_query(&l.sets[2].labels, 0);
        assert!(q.ends_with(&format!("Set 3:\n{} ->", p.query[0])));
    }

    #[test]
    fn elicitation_asks_for_rule() {
        let p = build_prompt(&list(), 1, PromptMode::ChatElicitation);
        assert!(p.turns.last().unwrap().text.contains("Rule:"));
        assert!(!p.turns[p.turns.len() - 3].text.contains("Rule:"));
    }
}
