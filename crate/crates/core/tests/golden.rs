//! Prompt templates are frozen as golden files. Set `RULELAB_BLESS=1` to
//! rewrite them after an intentional template change.

use std::path::PathBuf;

use rulelab::exemplar::ExemplarList;
use rulelab::harness::{build_prompt, PromptMode};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn check(name: &str, actual: &str) {
    let path = dir().join("golden").join(name);
    if std::env::var_os("RULELAB_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

fn fixture() -> ExemplarList {
    ExemplarList::load(&dir().join("fixtures/prompt_list.json")).unwrap()
}

#[test]
fn chat_prompt_matches_golden() {
    check("chat.txt", &build_prompt(&fixture(), 3, PromptMode::Chat).render());
}

#[test]
fn elicitation_prompt_matches_golden() {
    check("chat_elicitation.txt", &build_prompt(&fixture(), 3, PromptMode::ChatElicitation).render());
}

#[test]
fn completion_prompt_matches_golden() {
    let list = fixture();
    let p = build_prompt(&list, 3, PromptMode::Completion);
    let last = p.query.len() - 1;
    check("completion.txt", &p.completion_query(&list.sets[3].labels, last));
}

#[test]
fn prompts_are_byte_stable() {
    let list = fixture();
    for mode in [PromptMode::Chat, PromptMode::Completion, PromptMode::ChatElicitation] {
        for k in 0..list.sets.len() {
            assert_eq!(build_prompt(&list, k, mode).render(), build_prompt(&list, k, mode).render());
        }
    }
}
