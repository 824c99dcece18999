use rulelab::exemplar::generate_list;

use super::{load_rules, rule_seed};
use crate::config::ExperimentConfig;
use crate::failure::{Failure, Failures};
use crate::provenance::Provenance;

pub fn gen(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (vocab, rules) = load_rules(cfg, &mut failures)?;
    let mut prov = Provenance::new("gen", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;
    if let Some(v) = &cfg.vocab {
        prov.input(v).map_err(Failure::data)?;
    }
    if rules.is_empty() && failures.0.is_empty() {
        log::warn!("manifest {} lists no rules; nothing generated", cfg.rules.display());
    }
    for r in &rules {
        let list = generate_list(&r.id, &r.concept, &vocab, rule_seed(cfg.seed, &r.id), cfg.n_sets);
        prov.write(&cfg.lists_dir, format!("{}.json", r.id), list.to_json().as_bytes()).map_err(Failure::data)?;
    }
    log::info!("wrote {} lists to {}", rules.len(), cfg.lists_dir.display());
    prov.finish(&cfg.lists_dir).map_err(Failure::data)?;
    failures.finish("gen")
}
