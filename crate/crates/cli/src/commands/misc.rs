use std::path::Path;

use anyhow::anyhow;
use serde::Serialize;

use rulelab::dsl::{self, EquivOptions, FeatureVocab};
use rulelab::exemplar::{split_rules, ExemplarList, SplitManifest};
use rulelab::plot::{fit_noise as fit, lattice, CompiledList, FitTarget, HypothesisSpace, NoiseParams};

use super::{csv_bytes, load_rules, read, to_json};
use crate::config::ExperimentConfig;
use crate::failure::{Failure, Failures};
use crate::human::{load_rows, process};
use crate::provenance::Provenance;

pub fn split(cfg: &ExperimentConfig, held_out: usize) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (_, rules) = load_rules(cfg, &mut failures)?;
    let ids: Vec<String> = rules.iter().map(|r| r.id.clone()).collect();
    let m = split_rules(&ids, held_out, cfg.seed).map_err(Failure::config)?;
    log::info!("{} training rules, {} held out", m.train.len(), m.held_out.len());
    let mut prov = Provenance::new("split", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;
    prov.write(&cfg.output_dir, "split.json", &to_json(&m)).map_err(Failure::data)?;
    prov.finish(&cfg.output_dir).map_err(Failure::data)?;
    failures.finish("split")
}

#[derive(Serialize)]
struct FitReport {
    alpha: f64,
    beta: f64,
    r2: f64,
    step: f64,
    grid_points: usize,
    max_size: usize,
    hypotheses: usize,
    train: Vec<String>,
    held_out: Vec<String>,
    held_out_r2: Option<f64>,
}

pub fn fit_noise(cfg: &ExperimentConfig, split: Option<&Path>, step: Option<f64>) -> Result<(), Failure> {
    let mut failures = Failures::default();
    let (vocab, rules) = load_rules(cfg, &mut failures)?;
    let hp = cfg.human.as_ref().ok_or_else(|| Failure::config(anyhow!("fit-noise needs `human` data in the config")))?;
    let step = step.unwrap_or(cfg.learner.fit_step);
    let grid = lattice(step).map_err(Failure::config)?;
    let mut prov = Provenance::new("fit-noise", cfg);
    prov.input(&cfg.rules).map_err(Failure::data)?;
    prov.input(hp).map_err(Failure::data)?;

    let manifest: Option<SplitManifest> = match split {
        Some(p) => {
            prov.input(p).map_err(Failure::data)?;
            Some(serde_json::from_str(&read(p).map_err(Failure::data)?).map_err(|e| Failure::data(anyhow!("split {}: {e}", p.display())))?)
        }
        None => None,
    };
    let rows = load_rows(hp).map_err(Failure::data)?;

    let mut lists: Vec<(ExemplarList, Vec<Option<f64>>)> = Vec::new();
    for r in &rules {
        let res = cfg.load_list(&r.id).and_then(|l| {
            let h = process(&rows, &l)?;
            Ok((l, h))
        });
        match res {
            Ok((l, Some(h))) => {
                prov.input(&cfg.list_path(&r.id)).map_err(Failure::data)?;
                lists.push((l, h.table.proportions()));
            }
            Ok((_, None)) => log::warn!("rule {}: no human data; skipped", r.id),
            Err(e) => failures.push(&r.id, Failure::data(e)),
        }
    }
    let is_train = |id: &str| manifest.as_ref().is_none_or(|m| m.train.iter().any(|t| t == id));
    let targets = |train: bool| -> Vec<FitTarget> {
        lists
            .iter()
            .filter(|(l, _)| is_train(&l.rule_id) == train)
            .map(|(l, h)| FitTarget { list: l, human: h.clone() })
            .collect()
    };
    let train = targets(true);
    if train.is_empty() {
        return Err(Failure::data(anyhow!("no training rules with human data")));
    }
    let grammar = cfg.grammar(&vocab).map_err(Failure::config)?;
    let space = HypothesisSpace::enumerate(&grammar, cfg.learner.max_size, cfg.learner.hypothesis_cap).map_err(Failure::config)?;
    log::info!("fitting {} grid points over {} rules ({} hypotheses)", grid.len(), train.len(), space.len());
    let res = fit(&space, &train, &grid).map_err(Failure::data)?;

    let held = targets(false);
    let held_out_r2 = (!held.is_empty()).then(|| held_out_r2(&space, &held, res.best)).flatten();
    let report = FitReport {
        alpha: res.best.alpha,
        beta: res.best.beta,
        r2: res.r2,
        step,
        grid_points: grid.len(),
        max_size: cfg.learner.max_size,
        hypotheses: space.len(),
        train: train.iter().map(|t| t.list.rule_id.clone()).collect(),
        held_out: held.iter().map(|t| t.list.rule_id.clone()).collect(),
        held_out_r2,
    };
    log::info!("best alpha {:.4}, beta {:.4}, R² {:.6}", report.alpha, report.beta, report.r2);
    let root = cfg.output_dir.join("fit");
    prov.write(&root, "fit_noise.json", &to_json(&report)).map_err(Failure::data)?;
    let rows = res.surface.iter().map(|p| {
        vec![format!("{:.4}", p.noise.alpha), format!("{:.4}", p.noise.beta), p.r2.map(|r| format!("{r:.9}")).unwrap_or_default()]
    });
    prov.write(&root, "surface.csv", &csv_bytes(&["alpha", "beta", "r2"], rows)).map_err(Failure::data)?;
    prov.finish(&root).map_err(Failure::data)?;
    failures.finish("fit-noise")
}

fn held_out_r2(space: &HypothesisSpace, held: &[FitTarget], noise: NoiseParams) -> Option<f64> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    for t in held {
        let c = CompiledList::new(space, t.list);
        model.extend(rulelab::plot::predictive(space, &c, noise));
        human.extend(t.human.iter().copied());
    }
    rulelab::metrics::r_squared(&model, &human).ok().map(|r| r.r2)
}

pub fn equiv(cfg: Option<&ExperimentConfig>, a: &str, b: &str) -> Result<(), Failure> {
    let (vocab, max_set_size) = match cfg {
        Some(c) => (c.vocab().map_err(Failure::config)?, c.equiv_max_set_size),
        None => (FeatureVocab::example(), 5),
    };
    let parse = |s: &str| dsl::parse(s, &vocab).map_err(|e| Failure::data(anyhow!("`{s}`: {e}")));
    let (ca, cb) = (parse(a)?, parse(b)?);
    let opts = EquivOptions { max_set_size, ..EquivOptions::default() };
    match dsl::smallest_counterexample(&ca, &cb, &vocab, opts).map_err(Failure::data)? {
        None => println!("equivalent over all sets of up to {max_set_size} objects"),
        Some(ctx) => {
            let objs: Vec<String> = ctx.objects().iter().map(|o| vocab.describe(*o)).collect();
            println!("not equivalent; counterexample:");
            println!("  set: [{}]", objs.join(", "));
            println!("  target: {} ({})", ctx.target(), vocab.describe(ctx.target_object()));
            println!("  {} -> {}", ca.to_source(&vocab), dsl::eval(&ca, &ctx));
            println!("  {} -> {}", cb.to_source(&vocab), dsl::eval(&cb, &ctx));
        }
    }
    Ok(())
}
