use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;

use rulelab::catalog::RuleEntry;
use rulelab::dsl::{Concept, FeatureVocab};
use rulelab::exemplar::ExemplarList;
use rulelab::fsutil::write_atomic;
use rulelab::harness::{EndpointConfig, HarnessError, ResponseCache};
use rulelab::metrics::{LabelRecord, LabelSeries};
use rulelab::plot::{
    classify_probability, dump_csv, map_rule, mh_sample, posterior_predictive, run_list, Evidence, Grammar,
    HypothesisSpace, MhOptions, NoiseParams, PosteriorState,
};

use super::{load_rules, read, rule_seed, to_json};
use crate::config::{ExperimentConfig, Inference};
use crate::failure::{Failure, Failures};
use crate::provenance::Provenance;

enum Outcome {
    Done,
    Skipped,
}

fn write(root: &Path, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
    let p = root.join(rel);
    write_atomic(&p, bytes).with_context(|| format!("writing {}", p.display())).map_err(Failure::data)
}

/// `rule_id set_index concept` lines; the entry at index n_sets is the rule
/// held after the last set.
fn map_lines(rule_id: &str, rules: &[Concept], vocab: &FeatureVocab) -> String {
    rules.iter().enumerate().map(|(k, c)| format!("{rule_id} {k} {}\n", c.to_source(vocab))).collect()
}

/// Concatenates per-rule files in manifest order.
fn combine(root: &Path, dir: &str, rules: &[RuleEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in rules {
        if let Ok(b) = std::fs::read(root.join(dir).join(format!("{}.txt", r.id))) {
            out.extend(b);
        }
    }
    out
}

fn record_outputs(prov: &mut Provenance, root: &Path, rules: &[RuleEntry], parts: &[(&str, &str)]) -> Result<(), Failure> {
    for r in rules {
        for (dir, ext) in parts {
            let rel = PathBuf::from(dir).join(format!("{}.{ext}", r.id));
            if root.join(&rel).exists() {
                prov.existing(root, &rel).map_err(Failure::data)?;
            }
        }
    }
    Ok(())
}

struct PlotRun {
    series: LabelSeries,
    maps: Vec<Concept>,
    dump: String,
}

fn plot_with_mh(grammar: &Grammar, list: &ExemplarList, noise: NoiseParams, cfg: &ExperimentConfig) -> Result<PlotRun, Failure> {
    let l = &cfg.learner;
    let seed = rule_seed(cfg.seed, &list.rule_id);
    let mut ev = Evidence::default();
    let mut records = Vec::new();
    let mut maps = Vec::new();
    let mut dump = String::from("timestep,concept,log_prior,log_likelihood,log_posterior\n");
    let vocab = &list.vocab;
    let snapshot = |k: usize, state: &PosteriorState, dump: &mut String| -> Result<Concept, Failure> {
        let mut hs: Vec<_> = state.hypotheses.iter().collect();
        hs.sort_by(|a, b| b.log_posterior.total_cmp(&a.log_posterior).then_with(|| a.concept.cmp(&b.concept)));
        for h in hs.into_iter().take(l.dump_top) {
            dump.push_str(&format!(
                "{k},\"{}\",{:.12},{:.12},{:.12}\n",
                h.concept.to_source(vocab),
                h.log_prior,
                h.log_likelihood,
                h.log_posterior
            ));
        }
        Ok(map_rule(state, vocab).map_err(Failure::data)?.clone())
    };
    for k in 0..=list.sets.len() {
        let opts = MhOptions::new(l.max_size, l.mh_iterations, seed.wrapping_add(k as u64));
        let state = mh_sample(grammar, &ev, noise, opts).map_err(Failure::config)?;
        maps.push(snapshot(k, &state, &mut dump)?);
        let Some(set) = list.sets.get(k) else { break };
        for t in 0..set.len() {
            let ctx = set.context(t);
            let p = posterior_predictive(&state, &ctx, noise);
            records.push(LabelRecord {
                set_index: k,
                object_index: t,
                gold: set.labels[t],
                model: Some(classify_probability(p)),
                p_true: Some(p),
                human: None,
            });
        }
        for t in 0..set.len() {
            ev.push(set.context(t), set.labels[t]);
        }
    }
    let series = LabelSeries { rule_id: list.rule_id.clone(), learner: "plot-mh".into(), records };
    Ok(PlotRun { series, maps, dump })
}

pub fn run_plot(cfg: &ExperimentConfig, alpha: Option<f64>, beta: Option<f64>, force: bool) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (vocab, rules) = load_rules(cfg, &mut failures)?;
    let l = &cfg.learner;
    let noise = NoiseParams::new(alpha.unwrap_or(l.alpha), beta.unwrap_or(l.beta)).map_err(Failure::config)?;
    let grammar = cfg.grammar(&vocab).map_err(Failure::config)?;
    let space = match l.inference {
        Inference::Enumerate => {
            let s = HypothesisSpace::enumerate(&grammar, l.max_size, l.hypothesis_cap).map_err(Failure::config)?;
            log::info!("{} hypotheses up to size {}", s.len(), l.max_size);
            Some(s)
        }
        Inference::Mh => None,
    };
    let root = cfg.output_dir.join("plot");

    let outcomes: Vec<(String, Result<Outcome, Failure>)> = rules
        .par_iter()
        .map(|r| {
            let res = (|| {
                let series_rel = format!("series/{}.json", r.id);
                if !force && root.join(&series_rel).exists() && root.join(format!("map/{}.txt", r.id)).exists() {
                    return Ok(Outcome::Skipped);
                }
                let list = cfg.load_list(&r.id).map_err(Failure::data)?;
                let run = match &space {
                    Some(space) => {
                        let run = run_list(space, &list, noise, l.dump_top).map_err(Failure::data)?;
                        let mut maps = run.map_rules.clone();
                        maps.push(run.final_rule.clone());
                        let dump = dump_csv(space, &run.trajectory, &list.vocab);
                        PlotRun { series: run.series, maps, dump }
                    }
                    None => plot_with_mh(&grammar, &list, noise, cfg)?,
                };
                if l.dump_top > 0 {
                    write(&root, &format!("posterior/{}.csv", r.id), run.dump.as_bytes())?;
                }
                write(&root, &format!("map/{}.txt", r.id), map_lines(&r.id, &run.maps, &list.vocab).as_bytes())?;
                write(&root, &series_rel, &to_json(&run.series))?;
                Ok(Outcome::Done)
            })();
            (r.id.clone(), res)
        })
        .collect();
    let (mut done, mut skipped) = (0, 0);
    for (id, res) in outcomes {
        match res {
            Ok(Outcome::Done) => done += 1,
            Ok(Outcome::Skipped) => skipped += 1,
            Err(f) => failures.push(&id, f),
        }
    }
    log::info!("plot: {done} rules run, {skipped} already complete");

    let mut prov = Provenance::new("run plot", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;
    if let Some(g) = &l.grammar {
        prov.input(g).map_err(Failure::data)?;
    }
    prov.input_bytes("noise", format!("{} {}", noise.alpha, noise.beta).as_bytes());
    for r in &rules {
        let p = cfg.list_path(&r.id);
        if p.exists() {
            prov.input(&p).map_err(Failure::data)?;
        }
    }
    record_outputs(&mut prov, &root, &rules, &[("series", "json"), ("map", "txt"), ("posterior", "csv")])?;
    prov.write(&root, "map_rules.txt", &combine(&root, "map", &rules)).map_err(Failure::data)?;
    prov.finish(&root).map_err(Failure::data)?;
    failures.finish("run plot")
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::Config(_) | HarnessError::Credentials(_) | HarnessError::Resume(_) => Failure::config(e),
        HarnessError::Io { .. } => Failure::data(e),
        _ => Failure::transport(e),
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

pub fn run_llm(cfg: &ExperimentConfig, force: bool) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (_, rules) = load_rules(cfg, &mut failures)?;
    let ep_path = cfg.endpoint.as_ref().ok_or_else(|| Failure::config(anyhow!("the llm engine needs `endpoint` in the config")))?;
    let ecfg = EndpointConfig::from_json(&read(ep_path).map_err(Failure::config)?).map_err(Failure::config)?;
    let transport = make_transport(&ecfg)?;
    let mode = cfg.prompt_mode;
    let root = cfg.output_dir.join("llm").join(sanitize(&ecfg.model)).join(mode.as_str());
    let cache = ResponseCache::new(cfg.output_dir.join("llm").join("cache"));

    let outcomes: Vec<(String, Result<Outcome, Failure>)> = rules
        .par_iter()
        .map(|r| {
            let res = (|| {
                let series_rel = format!("series/{}.json", r.id);
                let transcript = root.join(format!("transcripts/{}.json", r.id));
                if !force && root.join(&series_rel).exists() {
                    return Ok(Outcome::Skipped);
                }
                if force && transcript.exists() {
                    std::fs::remove_file(&transcript).map_err(Failure::data)?;
                }
                let list = cfg.load_list(&r.id).map_err(Failure::data)?;
                let (tr, stats) = rulelab::harness::run_session(&list, &ecfg, mode, transport.as_ref(), Some(&cache), Some(&transcript))
                    .map_err(harness_failure)?;
                log::info!(
                    "rule {}: {} sets, {} excluded, {} requests ({} cached)",
                    r.id,
                    tr.sets.len(),
                    tr.excluded_total,
                    stats.network_calls + stats.cache_hits,
                    stats.cache_hits
                );
                let elicited: String = tr
                    .sets
                    .iter()
                    .filter_map(|e| e.rule_text.as_ref().map(|t| format!("{} {} {}\n", r.id, e.set_index, t.replace('\n', " "))))
                    .collect();
                if !elicited.is_empty() {
                    write(&root, &format!("elicited/{}.txt", r.id), elicited.as_bytes())?;
                }
                write(&root, &series_rel, &to_json(&tr.series(&list, &ecfg.model)))?;
                Ok(Outcome::Done)
            })();
            (r.id.clone(), res)
        })
        .collect();
    for (id, res) in outcomes {
        if let Err(f) = res {
            failures.push(&id, f);
        }
    }

    let mut prov = Provenance::new("run llm", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;
    prov.input(ep_path).map_err(Failure::data)?;
    record_outputs(&mut prov, &root, &rules, &[("series", "json"), ("transcripts", "json"), ("elicited", "txt")])?;
    prov.write(&root, "elicited.txt", &combine(&root, "elicited", &rules)).map_err(Failure::data)?;
    prov.finish(&root).map_err(Failure::data)?;
    failures.finish("run llm")
}

#[cfg(feature = "http")]
fn make_transport(ecfg: &EndpointConfig) -> Result<Box<dyn rulelab::harness::Transport>, Failure> {
    Ok(Box::new(rulelab::harness::HttpTransport::new(ecfg).map_err(harness_failure)?))
}

#[cfg(not(feature = "http"))]
fn make_transport(_: &EndpointConfig) -> Result<Box<dyn rulelab::harness::Transport>, Failure> {
    Err(Failure::config(anyhow!("this build has no HTTP support; rebuild with the `http` feature")))
}
