mod gen;
mod grade;
mod misc;
mod report;
mod run;

pub use gen::gen;
pub use grade::grade;
pub use misc::{equiv, fit_noise, split};
pub use report::report;
pub use run::{run_llm, run_plot};

use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use rulelab::catalog::RuleEntry;
use rulelab::dsl::FeatureVocab;
use rulelab::fsutil::sha256_hex;

use crate::config::ExperimentConfig;
use crate::failure::{Failure, Failures};

/// Per-rule seed derived from the experiment seed and the rule id.
pub fn rule_seed(seed: u64, rule_id: &str) -> u64 {
    let h = sha256_hex(format!("{seed}/{rule_id}").as_bytes());
    u64::from_str_radix(&h[..16], 16).expect("hex digest")
}

/// Vocabulary and manifest; malformed manifest lines become per-rule failures.
fn load_rules(cfg: &ExperimentConfig, failures: &mut Failures) -> Result<(FeatureVocab, Vec<RuleEntry>), Failure> {
    let vocab = cfg.vocab().map_err(Failure::config)?;
    let (rules, errors) = cfg.manifest(&vocab).map_err(Failure::config)?;
    for e in errors {
        failures.push(&format!("line {}", e.line), Failure::data(e));
    }
    Ok((vocab, rules))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}
